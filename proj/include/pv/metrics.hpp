#pragma once

#include "pv/geometry.hpp"
#include "pv/kernels.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace pv {

/// Mean distance between corresponding model points under the two poses.
double add_metric(std::span<const Point3> model, const RigidTransform& gt, const RigidTransform& est,
                  kernels::Exec exec = kernels::Exec::parallel);

/// Mean distance from each gt-posed point to the closest est-posed point.
double adds_metric(std::span<const Point3> model, const RigidTransform& gt, const RigidTransform& est,
                   kernels::Exec exec = kernels::Exec::parallel);

struct PoseCase {
  std::span<const Point3> model;
  double diameter = 0.0;
  RigidTransform gt;
  RigidTransform est;
  bool symmetric = false;
};

/// Error used for accuracy and F1: ADD, or ADD-S for symmetric objects.
double pose_error(const PoseCase& c);

/// Fraction of cases whose pose error is below coeff * D.
double add_accuracy(std::span<const PoseCase> cases, double coeff);

struct DetectionResult {
  std::string object_id;
  RigidTransform estimated;
  double score = 0.0;
};

struct GroundTruth {
  std::string object_id;
  RigidTransform pose;
};

struct ObjectModel {
  std::vector<Point3> points;
  double diameter = 0.0;
  bool symmetric = false;
};

struct F1Result {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t true_positives = 0;
  std::size_t detections = 0;
  std::size_t ground_truths = 0;
};

/// Detections are visited by descending score; each claims the closest unmatched
/// ground truth of its object whose pose error is below coeff * D.
F1Result f1_score(std::span<const DetectionResult> detections, std::span<const GroundTruth> ground_truths,
                  const std::map<std::string, ObjectModel>& models, double coeff = 0.1);

struct ObjectReport {
  std::string object_id;
  double add_accuracy = 0.0;  // ground truths whose best detection is correct
  F1Result f1;
};

struct EvalReport {
  std::vector<ObjectReport> objects;
  F1Result overall;
  double coeff = 0.1;
};

EvalReport evaluate(std::span<const DetectionResult> detections, std::span<const GroundTruth> ground_truths,
                    const std::map<std::string, ObjectModel>& models, double coeff = 0.1);

/// Aligned plain-text table.
std::string format_report(const EvalReport& report);
/// One `key value` line per number, machine readable.
std::string format_report_records(const EvalReport& report);

}  // namespace pv
