#include "pv/voting.hpp"

#include "pv/error.hpp"
#include "pv/kdtree.hpp"
#include "pv/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>

namespace pv {

PoseVote cast_vote(const RigidTransform& t_gl, const PoseVector6& t_lo, std::size_t source_patch, double confidence) {
  return {invert(compose(from_vector(t_lo), t_gl)), source_patch, confidence};
}

double pose_distance(const RigidTransform& a, const RigidTransform& b, double diameter) {
  if (!(diameter > 0.0)) throw Error(Errc::InvalidArgument, "diameter must be positive");
  const double angle = rotation_angle(a.rotation().transpose() * b.rotation());
  return angle / std::numbers::pi + (a.translation() - b.translation()).norm() / diameter;
}

RigidTransform mean_pose(std::span<const PoseVote> votes, std::span<const std::size_t> members) {
  if (members.empty()) throw Error(Errc::InvalidArgument, "mean of an empty vote set");
  Eigen::Matrix3d r = Eigen::Matrix3d::Zero();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  for (auto i : members) {
    r += votes[i].pose.rotation();
    t += votes[i].pose.translation();
  }
  t /= static_cast<double>(members.size());
  if (members.size() == 1) return votes[members.front()].pose;
  return RigidTransform(project_to_rotation(r), t);
}

namespace {

struct Cluster {
  RigidTransform pose;
  std::vector<std::size_t> members;
};

double score_of(std::span<const PoseVote> votes, const std::vector<std::size_t>& members, bool weighted) {
  if (!weighted) return static_cast<double>(members.size());
  double s = 0.0;
  for (auto i : members) s += votes[i].confidence;
  return s;
}

}  // namespace

std::vector<PoseCluster> aggregate_votes(std::span<const PoseVote> votes, const AggregateOptions& options,
                                         double diameter, std::uint64_t seed) {
  if (votes.empty()) throw Error(Errc::NoClusterSurvives, "no votes to aggregate");
  if (options.k < 1) throw Error(Errc::InvalidArgument, "K must be at least 1");
  const std::size_t n = votes.size();

  // K distinct seed votes.
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  std::mt19937_64 rng(seed);
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(options.k), n);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> d(i, n - 1);
    std::swap(pool[i], pool[d(rng)]);
  }
  std::vector<RigidTransform> centers;
  for (std::size_t i = 0; i < k; ++i) centers.push_back(votes[pool[i]].pose);

  std::vector<std::size_t> assign(n, std::numeric_limits<std::size_t>::max());
  std::vector<Cluster> clusters;
  for (int iter = 0; iter < std::max(options.max_iters, 1); ++iter) {
    bool changed = false;
    for (std::size_t v = 0; v < n; ++v) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < centers.size(); ++c) {
        const double d = pose_distance(votes[v].pose, centers[c], diameter);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[v] != best) {
        assign[v] = best;
        changed = true;
      }
    }
    clusters.assign(centers.size(), {});
    for (std::size_t v = 0; v < n; ++v) clusters[assign[v]].members.push_back(v);
    // Drop empty clusters and renumber the assignment.
    std::vector<std::size_t> remap(centers.size(), 0);
    std::vector<Cluster> kept;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      if (clusters[c].members.empty()) continue;
      remap[c] = kept.size();
      clusters[c].pose = mean_pose(votes, clusters[c].members);
      kept.push_back(std::move(clusters[c]));
    }
    if (kept.size() != centers.size()) {
      for (auto& a : assign) a = remap[a];
    }
    clusters = std::move(kept);
    centers.clear();
    for (const auto& c : clusters) centers.push_back(c.pose);
    if (!changed && iter > 0) break;
  }

  // Merge the closest pair below delta until none is left.
  for (;;) {
    double best = options.delta;
    std::size_t bi = 0, bj = 0;
    bool found = false;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        const double d = pose_distance(clusters[i].pose, clusters[j].pose, diameter);
        if (d < best) {
          best = d;
          bi = i;
          bj = j;
          found = true;
        }
      }
    }
    if (!found) break;
    auto& a = clusters[bi];
    a.members.insert(a.members.end(), clusters[bj].members.begin(), clusters[bj].members.end());
    std::sort(a.members.begin(), a.members.end());
    a.pose = mean_pose(votes, a.members);
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
  }

  std::vector<PoseCluster> out;
  const double min_size = options.min_frac * static_cast<double>(n);
  for (auto& c : clusters) {
    if (static_cast<double>(c.members.size()) < min_size) continue;
    out.push_back({c.pose, c.members, score_of(votes, c.members, options.confidence_weighting)});
  }
  if (out.empty()) throw Error(Errc::NoClusterSurvives, std::to_string(n) + " votes, no cluster reached the minimum size");
  std::stable_sort(out.begin(), out.end(), [](const PoseCluster& a, const PoseCluster& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.members.front() < b.members.front();
  });
  return out;
}

std::vector<PoseCluster> suppress_duplicates(std::vector<PoseCluster> clusters, double delta, double diameter) {
  std::vector<PoseCluster> kept;
  for (auto& c : clusters) {
    const bool dup = std::any_of(kept.begin(), kept.end(),
                                 [&](const PoseCluster& k) { return pose_distance(k.pose, c.pose, diameter) < delta; });
    if (!dup) kept.push_back(std::move(c));
  }
  return kept;
}

// ---- ICP ----------------------------------------------------------------------

namespace {

struct Pairs {
  std::vector<Point3> src;  // model points under the current pose, median-trimmed
  std::vector<Point3> dst;  // matched scene points
  std::vector<Point3> all_src, all_dst;  // every pair inside the absolute cap
  double rmse = 0.0;        // over all_src / all_dst
};

class Matcher {
 public:
  Matcher(std::span<const Point3> model, std::span<const Point3> scene, const IcpOptions& options)
      : model_(model), scene_(scene), options_(options) {
    if (options.direction == IcpDirection::model_to_scene) {
      tree_.emplace(scene_);
    } else {
      tree_.emplace(model_);
    }
  }

  Pairs match(const RigidTransform& pose) const {
    std::vector<Point3> a, b;  // (model under pose, scene) candidates
    std::vector<double> d;
    if (options_.direction == IcpDirection::model_to_scene) {
      a = pose.apply(model_);
      const auto nn = kernels::parallel::nearest_batch(*tree_, a);
      b.reserve(a.size());
      for (const auto& m : nn) {
        b.push_back(scene_[m.index]);
        d.push_back(std::sqrt(m.distance_sq));
      }
    } else {
      const RigidTransform inv = invert(pose);
      const auto local = inv.apply(scene_);
      const auto nn = kernels::parallel::nearest_batch(*tree_, local);
      for (std::size_t i = 0; i < nn.size(); ++i) {
        a.push_back(pose.apply(model_[nn[i].index]));
        b.push_back(scene_[i]);
        d.push_back(std::sqrt(nn[i].distance_sq));
      }
    }

    std::vector<double> sorted = d;
    const auto mid = sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2);
    std::nth_element(sorted.begin(), mid, sorted.end());
    double limit = std::max(options_.reject_factor * *mid, 1e-12);
    if (options_.max_distance > 0.0) limit = std::min(limit, options_.max_distance);

    const double cap = options_.max_distance > 0.0 ? options_.max_distance : std::numeric_limits<double>::infinity();
    Pairs p;
    double sq = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d[i] > cap) continue;
      p.all_src.push_back(a[i]);
      p.all_dst.push_back(b[i]);
      sq += d[i] * d[i];
      if (d[i] > limit) continue;
      p.src.push_back(a[i]);
      p.dst.push_back(b[i]);
    }
    if (!p.all_src.empty()) p.rmse = std::sqrt(sq / static_cast<double>(p.all_src.size()));
    return p;
  }

 private:
  std::span<const Point3> model_;
  std::span<const Point3> scene_;
  IcpOptions options_;
  std::optional<KdTree> tree_;
};

}  // namespace

IcpResult icp_refine(std::span<const Point3> model, std::span<const Point3> scene, const RigidTransform& initial,
                     const IcpOptions& options) {
  if (model.empty() || scene.empty()) throw Error(Errc::NoCorrespondences, "ICP needs two non-empty clouds");
  const Matcher matcher(model, scene, options);

  IcpResult r;
  r.pose = initial;
  Pairs pairs = matcher.match(initial);
  if (pairs.src.size() < 3) throw Error(Errc::NoCorrespondences, "no point pairs within the rejection radius");
  r.rmse = pairs.rmse;
  r.rmse_history.push_back(r.rmse);

  // Try the outlier-trimmed fit first. Trimming can raise the RMSE when the
  // inlier set shifts; the untrimmed fit cannot, so it is the fallback.
  const auto try_step = [&](const std::vector<Point3>& src, const std::vector<Point3>& dst,
                            RigidTransform& candidate, Pairs& next) {
    if (src.size() < 3) return false;
    try {
      candidate = compose(fit_rigid(src, dst), r.pose);
    } catch (const Error&) {
      return false;
    }
    next = matcher.match(candidate);
    return next.src.size() >= 3 && next.rmse <= r.rmse;
  };

  for (int it = 0; it < options.max_iters && r.rmse > 0.0; ++it) {
    RigidTransform candidate;
    Pairs next;
    if (!try_step(pairs.src, pairs.dst, candidate, next) &&
        !try_step(pairs.all_src, pairs.all_dst, candidate, next))
      break;
    const double gain = r.rmse - next.rmse;
    r.pose = candidate;
    r.rmse = next.rmse;
    r.rmse_history.push_back(r.rmse);
    ++r.iterations;
    pairs = std::move(next);
    if (gain < options.tol) break;
  }
  return r;
}

}  // namespace pv
