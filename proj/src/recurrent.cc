// Copyright 2026 The dpens Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Single-layer recurrent regressor:
//   h_t = tanh(Wx x_t + Wh h_{t-1} + b),  y_t = v . h_t + c,  h_{-1} = 0.
// Trained with Adam on overlapping windows by backpropagation through time.

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dpens/error.h"
#include "dpens/models.h"
#include "dpens/random.h"

namespace dpens::internal {
namespace {

struct Layout {
  Eigen::Index f, h;
  Eigen::Index wx() const { return 0; }
  Eigen::Index wh() const { return h * f; }
  Eigen::Index b() const { return wh() + h * h; }
  Eigen::Index v() const { return b() + h; }
  Eigen::Index c() const { return v() + h; }
  Eigen::Index size() const { return c() + 1; }
};

struct Window {
  const PatientRecord* record;
  int start, len;
};

template <typename Vec>
struct Params {
  Params(Vec& flat, const Layout& l)
      : wx(flat.data() + l.wx(), l.h, l.f),
        wh(flat.data() + l.wh(), l.h, l.h),
        b(flat.data() + l.b(), l.h),
        v(flat.data() + l.v(), l.h),
        c(flat.data()[l.c()]) {}
  Eigen::Map<Eigen::MatrixXd> wx, wh;
  Eigen::Map<Eigen::VectorXd> b, v;
  double& c;
};

Layout MakeLayout(const RegressorConfig& cfg, Eigen::Index f) { return Layout{f, cfg.hidden}; }

}  // namespace

std::vector<double> PredictRecurrentRaw(const std::vector<double>& params, const RegressorConfig& config,
                                        const Eigen::MatrixXd& grid) {
  const Layout l = MakeLayout(config, grid.cols());
  if (static_cast<Eigen::Index>(params.size()) != l.size()) {
    throw Error(ErrorCode::kShape, "recurrent parameter block has the wrong size");
  }
  Eigen::Map<const Eigen::MatrixXd> wx(params.data() + l.wx(), l.h, l.f);
  Eigen::Map<const Eigen::MatrixXd> wh(params.data() + l.wh(), l.h, l.h);
  Eigen::Map<const Eigen::VectorXd> b(params.data() + l.b(), l.h);
  Eigen::Map<const Eigen::VectorXd> v(params.data() + l.v(), l.h);
  const double c = params[static_cast<size_t>(l.c())];

  const Eigen::MatrixXd input = wx * grid.transpose();  // h x T
  std::vector<double> out(static_cast<size_t>(grid.rows()));
  Eigen::VectorXd h = Eigen::VectorXd::Zero(l.h);
  for (Eigen::Index t = 0; t < grid.rows(); ++t) {
    h = (input.col(t) + wh * h + b).array().tanh();
    out[static_cast<size_t>(t)] = v.dot(h) + c;
  }
  return out;
}

std::vector<double> TrainRecurrent(std::span<const PatientRecord> records, const RegressorConfig& cfg,
                                   uint64_t seed) {
  const Layout l = MakeLayout(cfg, records.front().features());
  Rng rng(seed);

  std::vector<double> flat(static_cast<size_t>(l.size()));
  Eigen::Map<Eigen::VectorXd> theta(flat.data(), l.size());
  {
    Params<std::vector<double>> p(flat, l);
    const double sx = 1.0 / std::sqrt(static_cast<double>(l.f));
    const double sh = 0.5 / std::sqrt(static_cast<double>(l.h));
    for (Eigen::Index i = 0; i < p.wx.size(); ++i) p.wx.data()[i] = rng.Normal(0.0, sx);
    for (Eigen::Index i = 0; i < p.wh.size(); ++i) p.wh.data()[i] = rng.Normal(0.0, sh);
    p.b.setZero();
    for (Eigen::Index i = 0; i < p.v.size(); ++i) p.v(i) = rng.Normal(0.0, sh);
    double sum = 0, n = 0;
    for (const PatientRecord& r : records) {
      sum += std::accumulate(r.labels.begin(), r.labels.end(), 0.0);
      n += r.steps();
    }
    p.c = sum / n;
  }

  std::vector<Window> windows;
  const int stride = cfg.window_steps - cfg.window_overlap;
  for (const PatientRecord& r : records) {
    for (int s = 0;; s += stride) {
      const int len = std::min(cfg.window_steps, r.steps() - s);
      windows.push_back({&r, s, len});
      if (s + cfg.window_steps >= r.steps()) break;
    }
  }

  std::vector<double> grad_flat(flat.size());
  Eigen::Map<Eigen::VectorXd> grad(grad_flat.data(), l.size());
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(l.size()), m2 = Eigen::VectorXd::Zero(l.size());
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;
  long step = 0;

  std::vector<size_t> order(windows.size());
  Eigen::MatrixXd hs, pre_in;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), size_t{0});
    rng.Shuffle(std::span<size_t>(order));
    for (size_t batch = 0; batch < order.size(); batch += static_cast<size_t>(cfg.batch_windows)) {
      const size_t end = std::min(order.size(), batch + static_cast<size_t>(cfg.batch_windows));
      double n_steps = 0;
      for (size_t k = batch; k < end; ++k) n_steps += windows[order[k]].len;

      grad.setZero();
      Params<std::vector<double>> g(grad_flat, l);
      Params<std::vector<double>> p(flat, l);
      for (size_t k = batch; k < end; ++k) {
        const Window& w = windows[order[k]];
        const Eigen::MatrixXd x = w.record->grid.middleRows(w.start, w.len);
        pre_in = p.wx * x.transpose();
        hs.resize(l.h, w.len + 1);
        hs.col(0).setZero();  // hs.col(t + 1) is h_t
        Eigen::VectorXd dy(w.len);
        for (int t = 0; t < w.len; ++t) {
          hs.col(t + 1) = (pre_in.col(t) + p.wh * hs.col(t) + p.b).array().tanh();
          const double y = p.v.dot(hs.col(t + 1)) + p.c;
          dy(t) = 2.0 * (y - w.record->labels[static_cast<size_t>(w.start + t)]) / n_steps;
        }
        Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(l.h);
        for (int t = w.len - 1; t >= 0; --t) {
          g.v += dy(t) * hs.col(t + 1);
          g.c += dy(t);
          const Eigen::VectorXd dh = dy(t) * p.v + dh_next;
          const Eigen::VectorXd dpre = dh.array() * (1.0 - hs.col(t + 1).array().square());
          g.wx += dpre * x.row(t);
          g.wh += dpre * hs.col(t).transpose();
          g.b += dpre;
          dh_next = p.wh.transpose() * dpre;
        }
      }
      const double norm = grad.norm();
      if (norm > cfg.clip_norm) grad *= cfg.clip_norm / norm;
      ++step;
      m1 = kBeta1 * m1 + (1 - kBeta1) * grad;
      m2 = kBeta2 * m2 + (1 - kBeta2) * grad.cwiseProduct(grad);
      const double c1 = 1 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1 - std::pow(kBeta2, static_cast<double>(step));
      theta.array() -= cfg.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + kAdamEps);
    }
  }
  return flat;
}

}  // namespace dpens::internal
