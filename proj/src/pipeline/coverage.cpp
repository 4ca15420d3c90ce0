#include <cmath>
#include <iomanip>
#include <sstream>
#include <unordered_set>

#include "neuco/pipeline.hpp"

namespace neuco::pipeline {

std::vector<CoverageReport> coverage_study(const features::SslFrameSequence& source,
                                           const std::vector<features::SslFrameSequence>& references,
                                           const std::vector<double>& durations_s, std::size_t k) {
  features::validate(source);
  if (durations_s.empty()) throw ValidationError("coverage study needs at least one duration");
  const auto full = features::build_pool(references);
  const double frames_per_second = 1000.0 / features::kSslFramePeriodMs;

  std::vector<CoverageReport> out;
  for (double d : durations_s) {
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw ValidationError("pool duration must be positive");
    }
    const auto frames = static_cast<std::size_t>(std::llround(d * frames_per_second));
    if (frames > full.size()) {
      std::ostringstream msg;
      msg << "requested " << d << " s (" << frames << " frames) but the reference set has only "
          << full.size() << " frames";
      throw ValidationError(msg.str());
    }
    const auto pool = full.prefix(frames);
    if (k > pool.size()) {
      throw ValidationError("k=" + std::to_string(k) + " exceeds pool of " +
                            std::to_string(pool.size()) + " frames");
    }
    features::KnnOptions opts;
    opts.k = k;
    const auto match = features::knn_match(source, pool, opts);

    std::unordered_set<std::size_t> distinct;
    double top1 = 0.0;
    for (const auto& nbs : match.neighbors) {
      for (const auto& nb : nbs) distinct.insert(nb.pool_index);
      top1 += nbs.front().similarity;
    }
    CoverageReport r;
    r.pool_duration_s = d;
    r.pool_frames = pool.size();
    r.distinct_matched_frames = distinct.size();
    r.coverage_ratio = static_cast<double>(distinct.size()) / static_cast<double>(pool.size());
    r.mean_top1_similarity = top1 / static_cast<double>(match.neighbors.size());
    out.push_back(r);
  }
  return out;
}

std::string format_coverage(const std::vector<CoverageReport>& reports) {
  std::ostringstream out;
  out << "duration_s\tpool_frames\tdistinct_matched\tcoverage_ratio\tmean_top1_similarity\n";
  for (const auto& r : reports) {
    out << std::setprecision(6) << r.pool_duration_s << '\t' << r.pool_frames << '\t'
        << r.distinct_matched_frames << '\t' << std::fixed << r.coverage_ratio << '\t'
        << r.mean_top1_similarity << std::defaultfloat << '\n';
  }
  return out.str();
}

}  // namespace neuco::pipeline
