#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "neuco/pipeline.hpp"

namespace neuco::pipeline {

void setup_logging() {
  auto logger = spdlog::get("neuco");
  if (!logger) {
    logger = spdlog::stderr_color_mt("neuco");
    logger->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    spdlog::set_default_logger(logger);
  }

  const char* env = std::getenv("NEUCO_LOG");
  std::string level = env ? env : "error";
  if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else if (level == "info") {
    spdlog::set_level(spdlog::level::info);
  } else {
    spdlog::set_level(spdlog::level::err);
  }
}

}  // namespace neuco::pipeline
