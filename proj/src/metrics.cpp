#include "pv/metrics.hpp"

#include "pv/error.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace pv {

double add_metric(std::span<const Point3> model, const RigidTransform& gt, const RigidTransform& est,
                  kernels::Exec exec) {
  if (model.empty()) throw Error(Errc::InvalidArgument, "ADD needs a non-empty model");
  return exec == kernels::Exec::serial ? kernels::serial::mean_pair_distance(model, gt, est)
                                       : kernels::parallel::mean_pair_distance(model, gt, est);
}

double adds_metric(std::span<const Point3> model, const RigidTransform& gt, const RigidTransform& est,
                   kernels::Exec exec) {
  if (model.empty()) throw Error(Errc::InvalidArgument, "ADD-S needs a non-empty model");
  return exec == kernels::Exec::serial ? kernels::serial::mean_closest_distance(model, gt, est)
                                       : kernels::parallel::mean_closest_distance(model, gt, est);
}

double pose_error(const PoseCase& c) {
  return c.symmetric ? adds_metric(c.model, c.gt, c.est) : add_metric(c.model, c.gt, c.est);
}

double add_accuracy(std::span<const PoseCase> cases, double coeff) {
  if (!(coeff > 0.0)) throw Error(Errc::InvalidArgument, "coefficient must be positive");
  if (cases.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& c : cases) {
    if (pose_error(c) < coeff * c.diameter) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(cases.size());
}

namespace {

const ObjectModel& model_for(const std::map<std::string, ObjectModel>& models, const std::string& id) {
  const auto it = models.find(id);
  if (it == models.end()) throw Error(Errc::UnknownModel, "no model for object '" + id + "'");
  return it->second;
}

double error_between(const ObjectModel& m, const RigidTransform& gt, const RigidTransform& est) {
  return pose_error({m.points, m.diameter, gt, est, m.symmetric});
}

void finish(F1Result& r) {
  r.precision = r.detections ? static_cast<double>(r.true_positives) / static_cast<double>(r.detections) : 0.0;
  r.recall = r.ground_truths ? static_cast<double>(r.true_positives) / static_cast<double>(r.ground_truths) : 0.0;
  const double s = r.precision + r.recall;
  r.f1 = s > 0.0 ? 2.0 * r.precision * r.recall / s : 0.0;
}

}  // namespace

F1Result f1_score(std::span<const DetectionResult> detections, std::span<const GroundTruth> ground_truths,
                  const std::map<std::string, ObjectModel>& models, double coeff) {
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return detections[a].score > detections[b].score; });

  F1Result r;
  r.detections = detections.size();
  r.ground_truths = ground_truths.size();
  std::vector<bool> taken(ground_truths.size(), false);
  for (auto di : order) {
    const auto& det = detections[di];
    const ObjectModel& m = model_for(models, det.object_id);
    std::size_t best = ground_truths.size();
    double best_err = coeff * m.diameter;
    for (std::size_t g = 0; g < ground_truths.size(); ++g) {
      if (taken[g] || ground_truths[g].object_id != det.object_id) continue;
      const double e = error_between(m, ground_truths[g].pose, det.estimated);
      if (e < best_err) {
        best_err = e;
        best = g;
      }
    }
    if (best < ground_truths.size()) {
      taken[best] = true;
      ++r.true_positives;
    }
  }
  finish(r);
  return r;
}

EvalReport evaluate(std::span<const DetectionResult> detections, std::span<const GroundTruth> ground_truths,
                    const std::map<std::string, ObjectModel>& models, double coeff) {
  if (!(coeff > 0.0)) throw Error(Errc::InvalidArgument, "coefficient must be positive");
  EvalReport report;
  report.coeff = coeff;
  std::set<std::string> ids;
  for (const auto& g : ground_truths) ids.insert(g.object_id);
  for (const auto& d : detections) ids.insert(d.object_id);

  for (const auto& id : ids) {
    std::vector<DetectionResult> dets;
    std::vector<GroundTruth> gts;
    for (const auto& d : detections) {
      if (d.object_id == id) dets.push_back(d);
    }
    for (const auto& g : ground_truths) {
      if (g.object_id == id) gts.push_back(g);
    }
    ObjectReport o;
    o.object_id = id;
    o.f1 = f1_score(dets, gts, models, coeff);
    if (!gts.empty()) {
      const ObjectModel& m = model_for(models, id);
      std::size_t hits = 0;
      for (const auto& g : gts) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& d : dets) best = std::min(best, error_between(m, g.pose, d.estimated));
        if (best < coeff * m.diameter) ++hits;
      }
      o.add_accuracy = static_cast<double>(hits) / static_cast<double>(gts.size());
    }
    report.overall.detections += o.f1.detections;
    report.overall.ground_truths += o.f1.ground_truths;
    report.overall.true_positives += o.f1.true_positives;
    report.objects.push_back(std::move(o));
  }
  finish(report.overall);
  return report;
}

std::string format_report(const EvalReport& report) {
  std::size_t width = 6;
  for (const auto& o : report.objects) width = std::max(width, o.object_id.size());
  std::ostringstream out;
  char line[256];
  char add_col[32];
  std::snprintf(add_col, sizeof add_col, "ADD<%gD", report.coeff);
  std::snprintf(line, sizeof line, "%-*s %8s %9s %7s %7s %5s %5s %5s\n", static_cast<int>(width), "object", add_col,
                "precision", "recall", "F1", "TP", "det", "gt");
  out << line;
  for (const auto& o : report.objects) {
    std::snprintf(line, sizeof line, "%-*s %8.3f %9.3f %7.3f %7.3f %5zu %5zu %5zu\n", static_cast<int>(width),
                  o.object_id.c_str(), o.add_accuracy, o.f1.precision, o.f1.recall, o.f1.f1, o.f1.true_positives,
                  o.f1.detections, o.f1.ground_truths);
    out << line;
  }
  const auto& a = report.overall;
  std::snprintf(line, sizeof line, "%-*s %8s %9.3f %7.3f %7.3f %5zu %5zu %5zu\n", static_cast<int>(width), "all", "-",
                a.precision, a.recall, a.f1, a.true_positives, a.detections, a.ground_truths);
  out << line;
  return out.str();
}

std::string format_report_records(const EvalReport& report) {
  std::ostringstream out;
  char line[512];
  for (const auto& o : report.objects) {
    std::snprintf(line, sizeof line, "eval %s add_accuracy %.9g precision %.9g recall %.9g f1 %.9g tp %zu det %zu gt %zu\n",
                  o.object_id.c_str(), o.add_accuracy, o.f1.precision, o.f1.recall, o.f1.f1, o.f1.true_positives,
                  o.f1.detections, o.f1.ground_truths);
    out << line;
  }
  const auto& a = report.overall;
  std::snprintf(line, sizeof line, "eval all precision %.9g recall %.9g f1 %.9g tp %zu det %zu gt %zu coeff %.9g\n",
                a.precision, a.recall, a.f1, a.true_positives, a.detections, a.ground_truths, report.coeff);
  out << line;
  return out.str();
}

}  // namespace pv
