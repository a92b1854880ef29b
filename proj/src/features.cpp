#include "pv/features.hpp"

#include "pv/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace pv {

DescriptorLayout descriptor_layout(int d_f) {
  DescriptorLayout layout;
  for (int g = 8; g >= 1; --g) {
    layout.grid = g;
    if (layout.raw() <= d_f) return layout;
  }
  throw Error(Errc::DimensionMismatch,
              "feature dimension " + std::to_string(d_f) + " is below the raw descriptor length " +
                  std::to_string(layout.raw()));
}

namespace {

void normalize_block(Eigen::Ref<Eigen::VectorXd> block) {
  const double n = block.norm();
  if (n > 0.0) block /= n;
}

}  // namespace

Feature compute_descriptor(std::span<const Point3> points, int d_f) {
  const DescriptorLayout layout = descriptor_layout(d_f);
  Feature f = Feature::Zero(d_f);
  if (points.empty()) return f;

  const int g = layout.grid;
  const int occ = layout.occupancy();
  auto occupancy = f.segment(0, occ);
  auto moments = f.segment(occ, DescriptorLayout::kMoments);
  auto radial = f.segment(occ + DescriptorLayout::kMoments, DescriptorLayout::kRadialBins);

  const double cell = 2.0 / g;
  const double radial_step = DescriptorLayout::kRadialMax / (DescriptorLayout::kRadialBins - 1);
  for (const auto& p : points) {
    // Trilinear splat onto cell centers; coordinates outside the cube clamp to the border cells.
    int base[3];
    double frac[3];
    for (int a = 0; a < 3; ++a) {
      const double u = std::clamp((p(a) + 1.0) / cell - 0.5, 0.0, static_cast<double>(g - 1));
      base[a] = std::min(static_cast<int>(u), std::max(g - 2, 0));
      frac[a] = g > 1 ? u - base[a] : 0.0;
    }
    for (int c = 0; c < 8; ++c) {
      double w = 1.0;
      int idx[3];
      for (int a = 0; a < 3; ++a) {
        const int bit = (c >> a) & 1;
        idx[a] = std::min(base[a] + bit, g - 1);
        w *= bit ? frac[a] : 1.0 - frac[a];
      }
      if (w > 0.0) occupancy((idx[0] * g + idx[1]) * g + idx[2]) += w;
    }

    for (int a = 0; a < 3; ++a) {
      double pw = 1.0;
      for (int o = 0; o < 4; ++o) {
        pw *= p(a);
        moments(a * 4 + o) += pw;
      }
    }

    const double u = std::min(p.norm() / radial_step, static_cast<double>(DescriptorLayout::kRadialBins - 1));
    const int lo = std::min(static_cast<int>(u), DescriptorLayout::kRadialBins - 2);
    const double t = u - lo;
    radial(lo) += 1.0 - t;
    radial(lo + 1) += t;
  }
  moments /= static_cast<double>(points.size());

  normalize_block(occupancy);
  normalize_block(moments);
  normalize_block(radial);
  normalize_block(f);
  return f;
}

double neighbor_weight(const Point3& c_i, const Point3& c_0, double diameter) {
  if (!(diameter > 0.0)) throw Error(Errc::InvalidArgument, "diameter must be positive");
  return std::clamp(1.0 - (c_i - c_0).norm() / diameter, 0.0, 1.0);
}

ReferenceVector reference_vector(double omega, int d_f, std::uint64_t seed) {
  if (d_f < 0) throw Error(Errc::InvalidArgument, "negative feature dimension");
  ReferenceVector mask(static_cast<std::size_t>(d_f));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& m : mask) m = u(rng) < omega ? 1 : 0;
  return mask;
}

Feature wnff_fuse(std::span<const Feature> features, std::span<const double> weights, FusionMode mode,
                  std::uint64_t seed) {
  if (features.empty() || features.size() != weights.size()) {
    throw Error(Errc::LengthMismatch, "need one weight per feature");
  }
  const auto d = features.front().size();
  for (const auto& f : features) {
    if (f.size() != d) throw Error(Errc::LengthMismatch, "features differ in dimension");
  }
  if (mode == FusionMode::concat) throw Error(Errc::InvalidArgument, "concat fusion goes through ConcatProjection");

  Feature out = Feature::Constant(d, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (mode == FusionMode::expected) {
      out = out.cwiseMax(weights[i] * features[i]);
    } else {
      const auto mask = reference_vector(weights[i], static_cast<int>(d), seed + i);
      for (Eigen::Index j = 0; j < d; ++j) out(j) = std::max(out(j), mask[j] ? features[i](j) : 0.0);
    }
  }
  return out;
}

ConcatProjection::ConcatProjection(int d_f, int k) : d_f_(d_f), k_(k) {
  if (d_f < 1 || k < 0) throw Error(Errc::InvalidArgument, "invalid concat projection shape");
}

Feature ConcatProjection::apply(std::span<const Feature> features) const {
  if (features.size() != static_cast<std::size_t>(k_ + 1)) {
    throw Error(Errc::LengthMismatch, "concat projection expects " + std::to_string(k_ + 1) + " features");
  }
  for (const auto& f : features) {
    if (f.size() != d_f_) throw Error(Errc::LengthMismatch, "features differ in dimension");
  }
  Feature out = features[0];
  for (int i = 1; i <= k_; ++i) out += features[static_cast<std::size_t>(i)] / k_;
  return out;
}

Eigen::MatrixXd ConcatProjection::matrix() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d_f_, static_cast<Eigen::Index>(d_f_) * (k_ + 1));
  m.leftCols(d_f_).setIdentity();
  for (int i = 1; i <= k_; ++i) m.middleCols(static_cast<Eigen::Index>(i) * d_f_, d_f_).diagonal().setConstant(1.0 / k_);
  return m;
}

}  // namespace pv
