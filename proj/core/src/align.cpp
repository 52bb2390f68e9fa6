#include "qbp/align.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qbp/parallel.hpp"

namespace qbp {

namespace {

int grid_cells(int image_dim, int patch) { return (image_dim + patch - 1) / patch; }

double charbonnier(double x, double eps) { return std::sqrt(x * x + eps * eps); }

Image<double> box_down2(const Image<double>& src) {
  const int w = (src.width + 1) / 2, h = (src.height + 1) / 2;
  Image<double> out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = src.at_clamped(2 * x, 2 * y) + src.at_clamped(2 * x + 1, 2 * y) +
                       src.at_clamped(2 * x, 2 * y + 1) + src.at_clamped(2 * x + 1, 2 * y + 1);
      out.at(x, y) = 0.25 * v;
    }
  }
  return out;
}

// Bilinear sample of `img` at (gx, gy) plus the spatial gradient of the
// sampled value with respect to (gx, gy). Border-clamped.
struct SampleGrad {
  double value, dx, dy;
};
SampleGrad bilinear_with_grad(const Image<double>& img, double gx, double gy) {
  const int x0 = static_cast<int>(std::floor(gx));
  const int y0 = static_cast<int>(std::floor(gy));
  const double fx = gx - x0, fy = gy - y0;
  const double v00 = img.at_clamped(x0, y0), v10 = img.at_clamped(x0 + 1, y0);
  const double v01 = img.at_clamped(x0, y0 + 1), v11 = img.at_clamped(x0 + 1, y0 + 1);
  SampleGrad s;
  s.value = (1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v10 + (1 - fx) * fy * v01 + fx * fy * v11;
  s.dx = (1 - fy) * (v10 - v00) + fy * (v11 - v01);
  s.dy = (1 - fx) * (v01 - v00) + fx * (v11 - v10);
  return s;
}

// Charbonnier data term of one patch at sub-pixel offset (u,v), with the
// gradient with respect to (u,v).
struct PatchEnergy {
  double e = 0.0, du = 0.0, dv = 0.0;
};
PatchEnergy patch_data_energy(const Image<double>& ref, const Image<double>& aux, int i, int j,
                              int patch, double u, double v, double eps) {
  PatchEnergy pe;
  const int x0 = i * patch, y0 = j * patch;
  for (int dy = 0; dy < patch; ++dy) {
    for (int dx = 0; dx < patch; ++dx) {
      const int x = std::min(x0 + dx, ref.width - 1);
      const int y = std::min(y0 + dy, ref.height - 1);
      const SampleGrad s = bilinear_with_grad(aux, x + u, y + v);
      const double d = s.value - ref.at(x, y);
      const double rho = charbonnier(d, eps);
      pe.e += rho;
      const double w = d / rho;  // rho'(d)
      pe.du += w * s.dx;
      pe.dv += w * s.dy;
    }
  }
  return pe;
}

}  // namespace

PatchFlow make_zero_flow(int image_w, int image_h, int patch_size, int timestamp) {
  PatchFlow f;
  f.patch_size_px = patch_size;
  f.grid_w = grid_cells(image_w, patch_size);
  f.grid_h = grid_cells(image_h, patch_size);
  f.uv.assign(static_cast<size_t>(f.grid_w) * f.grid_h, {0.0, 0.0});
  f.timestamp = timestamp;
  return f;
}

std::vector<BlockSum> block_sums(const FrameSequence& seq, int block_size) {
  if (block_size < 1) throw std::invalid_argument("block_size must be >= 1");
  if (block_size > seq.n_frames())
    throw std::invalid_argument("block_size exceeds sequence length");
  const int n_blocks = seq.n_frames() / block_size;  // partial trailing block dropped
  std::vector<BlockSum> out(static_cast<size_t>(n_blocks));
  for (int b = 0; b < n_blocks; ++b) {
    const SumImage s = sum_frames(seq, b * block_size, block_size);
    BlockSum& bs = out[static_cast<size_t>(b)];
    bs.counts = Image<double>(s.counts.width, s.counts.height);
    for (size_t k = 0; k < s.counts.data.size(); ++k)
      bs.counts.data[k] = static_cast<double>(s.counts.data[k]);
    bs.n_frames = block_size;
    bs.start_frame = b * block_size;
    bs.center_frame = b * block_size + block_size / 2;
  }
  return out;
}

MatchResult match_patch(const Image<double>& ref, const Image<double>& aux, int i, int j,
                        int patch_size, int search_radius, std::array<int, 2> init) {
  require_same_shape(ref, aux, "match_patch");
  const int x0 = i * patch_size, y0 = j * patch_size;
  if (x0 >= ref.width || y0 >= ref.height) throw std::invalid_argument("patch outside image");

  MatchResult best;
  bool first = true;
  double best_norm2 = 0.0;
  for (int v = init[1] - search_radius; v <= init[1] + search_radius; ++v) {
    for (int u = init[0] - search_radius; u <= init[0] + search_radius; ++u) {
      double e = 0.0;
      for (int dy = 0; dy < patch_size; ++dy) {
        for (int dx = 0; dx < patch_size; ++dx) {
          const int x = std::min(x0 + dx, ref.width - 1);
          const int y = std::min(y0 + dy, ref.height - 1);
          e += std::abs(aux.at_clamped(x + u, y + v) - ref.at(x, y));
        }
      }
      const double norm2 = static_cast<double>(u) * u + static_cast<double>(v) * v;
      const bool better =
          first || e < best.e_d ||
          (e == best.e_d && (norm2 < best_norm2 ||
                             (norm2 == best_norm2 &&
                              (u < best.u || (u == best.u && v < best.v)))));
      if (better) {
        best = {u, v, e};
        best_norm2 = norm2;
        first = false;
      }
    }
  }
  return best;
}

PatchFlow hierarchical_align(const BlockSum& ref, const BlockSum& aux, const AlignConfig& cfg) {
  require_same_shape(ref.counts, aux.counts, "hierarchical_align");
  if (cfg.pyramid_levels < 1) throw std::invalid_argument("pyramid_levels must be >= 1");
  const int M = cfg.patch_size_px;

  std::vector<Image<double>> ref_pyr{ref.counts}, aux_pyr{aux.counts};
  for (int l = 1; l < cfg.pyramid_levels; ++l) {
    ref_pyr.push_back(box_down2(ref_pyr.back()));
    aux_pyr.push_back(box_down2(aux_pyr.back()));
  }

  PatchFlow flow;  // at the current (coarsest-so-far) level
  for (int level = cfg.pyramid_levels - 1; level >= 0; --level) {
    const Image<double>& r = ref_pyr[static_cast<size_t>(level)];
    const Image<double>& a = aux_pyr[static_cast<size_t>(level)];
    PatchFlow next = make_zero_flow(r.width, r.height, M, aux.center_frame);
    const bool coarsest = level == cfg.pyramid_levels - 1;
    const PatchFlow parent = flow;  // copy: read-only during the parallel fill
    parallel_for(0, next.grid_h, [&](int64_t j) {
      for (int i = 0; i < next.grid_w; ++i) {
        std::array<int, 2> init{0, 0};
        if (!coarsest) {
          const int pi = std::min(i / 2, parent.grid_w - 1);
          const int pj = std::min(static_cast<int>(j) / 2, parent.grid_h - 1);
          const auto& p = parent.at(pi, pj);
          init = {static_cast<int>(std::lround(2.0 * p[0])),
                  static_cast<int>(std::lround(2.0 * p[1]))};
        }
        const MatchResult m =
            match_patch(r, a, i, static_cast<int>(j), M, cfg.radius_at(level), init);
        next.at(i, static_cast<int>(j)) = {static_cast<double>(m.u), static_cast<double>(m.v)};
      }
    });
    flow = std::move(next);
  }
  flow.granularity = PatchFlow::Granularity::Block;
  return flow;
}

double flow_energy(const PatchFlow& flow, const BlockSum& ref, const BlockSum& aux,
                   const AlignConfig& cfg) {
  const int M = flow.patch_size_px;
  std::vector<double> data(static_cast<size_t>(flow.grid_w) * flow.grid_h, 0.0);
  parallel_for(0, flow.grid_h, [&](int64_t j) {
    for (int i = 0; i < flow.grid_w; ++i) {
      const auto& p = flow.at(i, static_cast<int>(j));
      data[static_cast<size_t>(j) * flow.grid_w + i] =
          patch_data_energy(ref.counts, aux.counts, i, static_cast<int>(j), M, p[0], p[1],
                            cfg.charbonnier_eps)
              .e;
    }
  });
  double e = 0.0;
  for (const double d : data) e += d;
  for (int j = 0; j < flow.grid_h; ++j) {
    for (int i = 0; i < flow.grid_w; ++i) {
      const auto& p = flow.at(i, j);
      if (i + 1 < flow.grid_w) {
        const auto& q = flow.at(i + 1, j);
        e += cfg.lambda_reg * (charbonnier(q[0] - p[0], cfg.charbonnier_eps) +
                               charbonnier(q[1] - p[1], cfg.charbonnier_eps));
      }
      if (j + 1 < flow.grid_h) {
        const auto& q = flow.at(i, j + 1);
        e += cfg.lambda_reg * (charbonnier(q[0] - p[0], cfg.charbonnier_eps) +
                               charbonnier(q[1] - p[1], cfg.charbonnier_eps));
      }
    }
  }
  return e;
}

PatchFlow regularize_flow(const PatchFlow& flow, const BlockSum& ref, const BlockSum& aux,
                          const AlignConfig& cfg) {
  require_same_shape(ref.counts, aux.counts, "regularize_flow");
  PatchFlow cur = flow;
  const int M = cur.patch_size_px;
  const size_t n = cur.uv.size();
  const double eps = cfg.charbonnier_eps;

  double energy = flow_energy(cur, ref, aux, cfg);
  const double initial_energy = energy;
  double step = cfg.reg_initial_step_px;
  constexpr double kMinStep = 1e-4;

  std::vector<std::array<double, 2>> grad(n);
  for (int it = 0; it < cfg.reg_iterations && step >= kMinStep; ++it) {
    // Gradient of the data term (parallel, disjoint writes) ...
    parallel_for(0, cur.grid_h, [&](int64_t j) {
      for (int i = 0; i < cur.grid_w; ++i) {
        const auto& p = cur.at(i, static_cast<int>(j));
        const PatchEnergy pe = patch_data_energy(ref.counts, aux.counts, i, static_cast<int>(j),
                                                 M, p[0], p[1], eps);
        grad[static_cast<size_t>(j) * cur.grid_w + i] = {pe.du, pe.dv};
      }
    });
    // ... plus the flow-gradient coupling term.
    if (cfg.lambda_reg > 0.0) {
      for (int j = 0; j < cur.grid_h; ++j) {
        for (int i = 0; i < cur.grid_w; ++i) {
          const auto& p = cur.at(i, j);
          auto& g = grad[static_cast<size_t>(j) * cur.grid_w + i];
          for (int c = 0; c < 2; ++c) {
            if (i + 1 < cur.grid_w) {
              const double d = cur.at(i + 1, j)[static_cast<size_t>(c)] - p[static_cast<size_t>(c)];
              const double w = d / charbonnier(d, eps);
              g[static_cast<size_t>(c)] -= cfg.lambda_reg * w;
              grad[static_cast<size_t>(j) * cur.grid_w + i + 1][static_cast<size_t>(c)] +=
                  cfg.lambda_reg * w;
            }
            if (j + 1 < cur.grid_h) {
              const double d = cur.at(i, j + 1)[static_cast<size_t>(c)] - p[static_cast<size_t>(c)];
              const double w = d / charbonnier(d, eps);
              g[static_cast<size_t>(c)] -= cfg.lambda_reg * w;
              grad[static_cast<size_t>((j + 1)) * cur.grid_w + i][static_cast<size_t>(c)] +=
                  cfg.lambda_reg * w;
            }
          }
        }
      }
    }

    double gmax = 0.0;
    for (const auto& g : grad) gmax = std::max({gmax, std::abs(g[0]), std::abs(g[1])});
    if (gmax == 0.0) break;

    // Backtracking: largest component moves `step` pixels; halve on increase.
    bool accepted = false;
    while (step >= kMinStep) {
      PatchFlow cand = cur;
      const double scale = step / gmax;
      for (size_t k = 0; k < n; ++k) {
        cand.uv[k][0] -= scale * grad[k][0];
        cand.uv[k][1] -= scale * grad[k][1];
      }
      const double e_cand = flow_energy(cand, ref, aux, cfg);
      if (e_cand < energy) {
        cur = std::move(cand);
        energy = e_cand;
        accepted = true;
        step = std::min(step * 2.0, cfg.reg_initial_step_px);
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // local minimum at minimum step: converged
  }

  cur.non_convergence_warning = energy > initial_energy;  // cannot happen by construction
  return cur;
}

std::vector<PatchFlow> interpolate_flow(const std::vector<PatchFlow>& block_flows, int block_size,
                                        int n_frames, int ref_frame_index) {
  if (block_flows.empty()) throw std::invalid_argument("interpolate_flow: no block flows");
  if (block_size < 1 || n_frames < 1) throw std::invalid_argument("bad block size or frame count");
  if (ref_frame_index < 0 || ref_frame_index >= n_frames)
    throw std::invalid_argument("reference frame outside sequence");
  for (size_t b = 1; b < block_flows.size(); ++b) {
    if (block_flows[b].timestamp <= block_flows[b - 1].timestamp)
      throw std::invalid_argument("block flows must be in increasing timestamp order");
    if (block_flows[b].uv.size() != block_flows[0].uv.size())
      throw std::invalid_argument("block flow grids disagree");
  }

  std::vector<PatchFlow> out;
  out.reserve(static_cast<size_t>(n_frames));
  for (int t = 0; t < n_frames; ++t) {
    size_t hi = 0;
    while (hi < block_flows.size() && block_flows[hi].timestamp < t) ++hi;
    PatchFlow f;
    if (hi == 0) {
      f = block_flows.front();
    } else if (hi == block_flows.size()) {
      f = block_flows.back();
    } else {
      const PatchFlow& a = block_flows[hi - 1];
      const PatchFlow& b = block_flows[hi];
      const double w =
          static_cast<double>(t - a.timestamp) / static_cast<double>(b.timestamp - a.timestamp);
      f = a;
      for (size_t k = 0; k < f.uv.size(); ++k) {
        f.uv[k][0] = (1.0 - w) * a.uv[k][0] + w * b.uv[k][0];
        f.uv[k][1] = (1.0 - w) * a.uv[k][1] + w * b.uv[k][1];
      }
    }
    f.timestamp = t;
    f.granularity = PatchFlow::Granularity::Frame;
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace qbp
