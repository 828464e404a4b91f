#include "sdeblur/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "sdeblur/error.hpp"
#include "sdeblur/parallel.hpp"

namespace sdeblur {
namespace {

using Plane = std::vector<double>;

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::kDimensionMismatch, what);
}

Plane extract_channel(const ImageBuffer& image, int c) {
  const std::size_t n = image.pixel_count();
  const auto ch = static_cast<std::size_t>(image.channels());
  Plane p(n);
  const auto data = image.data();
  for (std::size_t i = 0; i < n; ++i) p[i] = data[i * ch + static_cast<std::size_t>(c)];
  return p;
}

void insert_channel(ImageBuffer& image, int c, const Plane& p) {
  const auto ch = static_cast<std::size_t>(image.channels());
  auto data = image.data();
  for (std::size_t i = 0; i < p.size(); ++i) data[i * ch + static_cast<std::size_t>(c)] = p[i];
}

Plane extract_component(const std::vector<double>& interleaved, int channels, int c) {
  const auto ch = static_cast<std::size_t>(channels);
  Plane p(interleaved.size() / ch);
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = interleaved[i * ch + static_cast<std::size_t>(c)];
  }
  return p;
}

void grad_plane(const Plane& in, int width, int height, Plane& gx, Plane& gy) {
  gx.assign(in.size(), 0.0);
  gy.assign(in.size(), 0.0);
  const auto w = static_cast<std::size_t>(width);
  parallel_for(static_cast<std::size_t>(height), [&](std::size_t y0, std::size_t y1) {
    for (std::size_t y = y0; y < y1; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t i = y * w + x;
        if (x + 1 < w) gx[i] = in[i + 1] - in[i];
        if (y + 1 < static_cast<std::size_t>(height)) gy[i] = in[i + w] - in[i];
      }
    }
  });
}

void grad_transpose_plane(const Plane& gx, const Plane& gy, int width, int height,
                          Plane& out) {
  out.assign(gx.size(), 0.0);
  const auto w = static_cast<std::size_t>(width);
  const auto h = static_cast<std::size_t>(height);
  parallel_for(h, [&](std::size_t y0, std::size_t y1) {
    for (std::size_t y = y0; y < y1; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t i = y * w + x;
        double v = 0.0;
        if (x + 1 < w) v -= gx[i];
        if (x > 0) v += gx[i - 1];
        if (y + 1 < h) v -= gy[i];
        if (y > 0) v += gy[i - w];
        out[i] = v;
      }
    }
  });
}

// Quadratic problem for one colour channel with frozen weights.
class ChannelSystem {
 public:
  ChannelSystem(const BlurOperator& op, const Plane& w2, Plane b, Plane rho_x,
                Plane rho_y, double alpha)
      : op_(op),
        w2_(w2),
        b_(std::move(b)),
        rho_x_(std::move(rho_x)),
        rho_y_(std::move(rho_y)),
        alpha_(alpha),
        n_(b_.size()) {}

  // out = (A^T W^2 A + alpha D^T P D) v
  void apply_normal(const Plane& v, Plane& out) const {
    Plane av(n_);
    op_.matrix().multiply(v, av, 1);
    for (std::size_t i = 0; i < n_; ++i) av[i] *= w2_[i];
    out.assign(n_, 0.0);
    op_.transpose_matrix().multiply(av, out, 1);

    Plane gx, gy, reg;
    grad_plane(v, op_.width(), op_.height(), gx, gy);
    for (std::size_t i = 0; i < n_; ++i) {
      gx[i] *= rho_x_[i];
      gy[i] *= rho_y_[i];
    }
    grad_transpose_plane(gx, gy, op_.width(), op_.height(), reg);
    for (std::size_t i = 0; i < n_; ++i) out[i] += alpha_ * reg[i];
  }

  // A^T W^2 B
  Plane rhs() const {
    Plane wb(n_);
    for (std::size_t i = 0; i < n_; ++i) wb[i] = w2_[i] * b_[i];
    Plane out(n_);
    op_.transpose_matrix().multiply(wb, out, 1);
    return out;
  }

  double energy(const Plane& v) const {
    Plane av(n_);
    op_.matrix().multiply(v, av, 1);
    Plane data(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      const double r = b_[i] - av[i];
      data[i] = w2_[i] * r * r;
    }
    Plane gx, gy;
    grad_plane(v, op_.width(), op_.height(), gx, gy);
    Plane prior(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      prior[i] = rho_x_[i] * gx[i] * gx[i] + rho_y_[i] * gy[i] * gy[i];
    }
    const Plane ones(n_, 1.0);
    return deterministic_dot(data, ones) + alpha_ * deterministic_dot(prior, ones);
  }

 private:
  const BlurOperator& op_;
  const Plane& w2_;
  Plane b_;
  Plane rho_x_;
  Plane rho_y_;
  double alpha_;
  std::size_t n_;
};

void axpy(double a, const Plane& x, Plane& y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

void check_weights(const WeightMap& w, const BlurOperator& op) {
  require(w.width == op.width() && w.height == op.height() &&
              w.w.size() == op.pixel_count(),
          "weight map does not match operator");
}

void check_rho(const GradientField& rho, const ImageBuffer& image) {
  const std::size_t n = image.size();
  require(rho.width == image.width() && rho.height == image.height() &&
              rho.channels == image.channels() && rho.dx.size() == n &&
              rho.dy.size() == n,
          "prior weights do not match image");
}

void check_image(const ImageBuffer& image, const BlurOperator& op, const char* what) {
  if (image.width() != op.width() || image.height() != op.height()) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(what) + " does not match operator dimensions");
  }
}

std::vector<ChannelSystem> build_systems(const ImageBuffer& blurred,
                                         const BlurOperator& op, const Plane& w2,
                                         const GradientField& rho,
                                         const SolverConfig& cfg) {
  std::vector<ChannelSystem> systems;
  for (int c = 0; c < blurred.channels(); ++c) {
    systems.emplace_back(op, w2, extract_channel(blurred, c),
                         extract_component(rho.dx, rho.channels, c),
                         extract_component(rho.dy, rho.channels, c), cfg.alpha);
  }
  return systems;
}

Plane squared_weights(const WeightMap& w) {
  Plane w2(w.w.size());
  for (std::size_t i = 0; i < w2.size(); ++i) w2[i] = w.w[i] * w.w[i];
  return w2;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(alpha > 0.0) || !(k_sigma > 0.0) || !(epsilon > 0.0 && epsilon < 1.0) ||
      !(prior_exponent > 0.0 && prior_exponent < 2.0)) {
    throw Error(ErrorCode::kInvariantViolation,
                "solver config requires alpha > 0, k_sigma > 0, 0 < epsilon < 1, "
                "0 < prior_exponent < 2");
  }
  if (outer_iterations < 1 || cg_iterations < 1 || n_samples < 1) {
    throw Error(ErrorCode::kInvariantViolation, "iteration counts must be positive");
  }
}

ImageBuffer WeightMap::as_image() const {
  return ImageBuffer(width, height, 1, w);
}

std::size_t OcclusionMask::count() const {
  return static_cast<std::size_t>(
      std::count_if(occluded.begin(), occluded.end(), [](std::uint8_t v) { return v != 0; }));
}

GradientField gradient(const ImageBuffer& image) {
  GradientField g{image.width(), image.height(), image.channels(),
                  std::vector<double>(image.size(), 0.0),
                  std::vector<double>(image.size(), 0.0)};
  for (int c = 0; c < image.channels(); ++c) {
    Plane gx, gy;
    grad_plane(extract_channel(image, c), image.width(), image.height(), gx, gy);
    const auto ch = static_cast<std::size_t>(image.channels());
    for (std::size_t i = 0; i < gx.size(); ++i) {
      g.dx[i * ch + static_cast<std::size_t>(c)] = gx[i];
      g.dy[i * ch + static_cast<std::size_t>(c)] = gy[i];
    }
  }
  return g;
}

ImageBuffer gradient_transpose(const GradientField& field) {
  ImageBuffer out(field.width, field.height, field.channels);
  require(field.dx.size() == out.size() && field.dy.size() == out.size(),
          "gradient field is malformed");
  for (int c = 0; c < field.channels; ++c) {
    Plane p;
    grad_transpose_plane(extract_component(field.dx, field.channels, c),
                         extract_component(field.dy, field.channels, c), field.width,
                         field.height, p);
    insert_channel(out, c, p);
  }
  return out;
}

GradientField irls_prior_weights(const GradientField& gradients, const SolverConfig& cfg) {
  GradientField rho = gradients;
  const double power = cfg.prior_exponent - 2.0;
  auto weight = [&](double c) {
    if (!std::isfinite(c)) {
      throw Error(ErrorCode::kInvalidArgument, "non-finite gradient");
    }
    return std::pow(std::max(std::abs(c), cfg.epsilon), power);
  };
  for (double& v : rho.dx) v = weight(v);
  for (double& v : rho.dy) v = weight(v);
  return rho;
}

WeightMap update_boundary_weights(const ImageBuffer& blurred, const BlurOperator& op,
                                  const ImageBuffer& estimate, const SolverConfig& cfg) {
  check_image(blurred, op, "blurred image");
  require(blurred.same_shape(estimate), "estimate does not match blurred image");
  const ImageBuffer predicted = apply_blur(op, estimate);
  WeightMap w(op.width(), op.height(), 1.0);
  const auto ch = static_cast<std::size_t>(blurred.channels());
  const auto b = blurred.data();
  const auto p = predicted.data();
  for (std::size_t i = 0; i < w.w.size(); ++i) {
    double r2 = 0.0;
    for (std::size_t c = 0; c < ch; ++c) {
      const double r = b[i * ch + c] - p[i * ch + c];
      r2 += r * r;
    }
    w.w[i] = std::exp(-cfg.k_sigma * r2);
  }
  return w;
}

WeightMap init_weights(const OcclusionMask& mask) {
  require(mask.occluded.size() == static_cast<std::size_t>(mask.width) * mask.height,
          "occlusion mask is malformed");
  WeightMap w(mask.width, mask.height, 1.0);
  for (std::size_t i = 0; i < w.w.size(); ++i) {
    if (mask.occluded[i] != 0) w.w[i] = 0.0;
  }
  return w;
}

std::string format_trace(const TraceRecord& record) {
  char buf[160];
  if (record.kind == TraceRecord::Kind::kCgStep) {
    std::snprintf(buf, sizeof(buf), "cg outer=%d channel=%d step=%d energy=%.17g",
                  record.outer, record.channel, record.cg_step, record.energy);
  } else {
    std::snprintf(buf, sizeof(buf), "outer outer=%d energy=%.17g max_weight_change=%.17g",
                  record.outer, record.energy, record.max_weight_change);
  }
  return buf;
}

double inner_energy(const ImageBuffer& blurred, const BlurOperator& op,
                    const WeightMap& w, const GradientField& rho,
                    const SolverConfig& cfg, const ImageBuffer& estimate) {
  check_image(blurred, op, "blurred image");
  require(blurred.same_shape(estimate), "estimate does not match blurred image");
  check_weights(w, op);
  check_rho(rho, blurred);
  const Plane w2 = squared_weights(w);
  const auto systems = build_systems(blurred, op, w2, rho, cfg);
  double total = 0.0;
  for (int c = 0; c < blurred.channels(); ++c) {
    total += systems[static_cast<std::size_t>(c)].energy(extract_channel(estimate, c));
  }
  return total;
}

ImageBuffer solve_inner(const ImageBuffer& blurred, const BlurOperator& op,
                        const WeightMap& w, const GradientField& rho,
                        const SolverConfig& cfg, const ImageBuffer& warm_start,
                        const TraceSink& trace, int outer_index) {
  cfg.validate();
  check_image(blurred, op, "blurred image");
  require(blurred.same_shape(warm_start), "warm start does not match blurred image");
  check_weights(w, op);
  check_rho(rho, blurred);

  const Plane w2 = squared_weights(w);
  const auto systems = build_systems(blurred, op, w2, rho, cfg);
  const int channels = blurred.channels();
  ImageBuffer result = warm_start;

  // Per-channel energies so traced values are totals over all channels.
  std::vector<double> channel_energy;
  if (trace) {
    for (int c = 0; c < channels; ++c) {
      channel_energy.push_back(
          systems[static_cast<std::size_t>(c)].energy(extract_channel(warm_start, c)));
    }
  }
  auto total_energy = [&] {
    double s = 0.0;
    for (double e : channel_energy) s += e;
    return s;
  };

  constexpr double kTiny = std::numeric_limits<double>::min();
  for (int c = 0; c < channels; ++c) {
    const ChannelSystem& sys = systems[static_cast<std::size_t>(c)];
    Plane x = extract_channel(warm_start, c);
    Plane hx;
    sys.apply_normal(x, hx);
    Plane r = sys.rhs();
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= hx[i];
    Plane p = r;
    double rr = deterministic_norm2(r);
    Plane hp;

    for (int k = 0; k < cfg.cg_iterations; ++k) {
      if (rr <= kTiny) break;
      sys.apply_normal(p, hp);
      double denom = deterministic_dot(p, hp);
      if (!(denom > kTiny)) {
        // Lost conjugacy: restart from the steepest-descent direction.
        p = r;
        sys.apply_normal(p, hp);
        denom = deterministic_dot(p, hp);
        if (!(denom > kTiny)) {
          throw Error(ErrorCode::kNumericalBreakdown,
                      "conjugate-gradient curvature underflow on channel " +
                          std::to_string(c));
        }
      }
      const double step = rr / denom;
      axpy(step, p, x);
      axpy(-step, hp, r);
      const double rr_next = deterministic_norm2(r);
      const double beta = rr_next / rr;
      rr = rr_next;
      for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * p[i];

      if (trace) {
        channel_energy[static_cast<std::size_t>(c)] = sys.energy(x);
        TraceRecord rec;
        rec.kind = TraceRecord::Kind::kCgStep;
        rec.outer = outer_index;
        rec.channel = c;
        rec.cg_step = k + 1;
        rec.energy = total_energy();
        trace(rec);
      }
    }
    insert_channel(result, c, x);
  }
  return result;
}

DeblurResult deblur(const ImageBuffer& blurred, const BlurOperator& op,
                    const OcclusionMask& mask, const SolverConfig& cfg,
                    const TraceSink& trace) {
  cfg.validate();
  check_image(blurred, op, "blurred image");
  require(mask.width == op.width() && mask.height == op.height(),
          "occlusion mask does not match operator");

  ImageBuffer estimate = blurred;
  WeightMap w = cfg.boundary_weights ? init_weights(mask)
                                     : WeightMap(op.width(), op.height(), 1.0);
  DeblurResult result;
  for (int n = 1; n <= cfg.outer_iterations; ++n) {
    const GradientField rho = irls_prior_weights(gradient(estimate), cfg);
    estimate = solve_inner(blurred, op, w, rho, cfg, estimate, trace, n);

    double change = 0.0;
    if (cfg.boundary_weights) {
      WeightMap next = update_boundary_weights(blurred, op, estimate, cfg);
      for (std::size_t i = 0; i < w.w.size(); ++i) {
        change = std::max(change, std::abs(next.w[i] - w.w[i]));
      }
      w = std::move(next);
    }
    result.weight_changes.push_back(change);
    if (trace) {
      TraceRecord rec;
      rec.kind = TraceRecord::Kind::kOuter;
      rec.outer = n;
      rec.energy = inner_energy(blurred, op, w, rho, cfg, estimate);
      rec.max_weight_change = change;
      trace(rec);
    }
  }
  result.image = estimate.clamped();
  result.weights = std::move(w);
  return result;
}

}  // namespace sdeblur
