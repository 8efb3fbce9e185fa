#include "fixmatch_reference.hpp"

#include <cmath>
#include <numbers>

#include "dgwm/rng.hpp"
#include "dgwm/tensor.hpp"

namespace refimpl {

using dgwm::Tensor;

namespace {

struct Layer {
  Tensor W;
  Tensor b;
  int in = 0;
  int out = 0;
};

Layer draw_layer(int in, int out, dgwm::Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::vector<double> w(static_cast<std::size_t>(out) * in);
  for (double& v : w) v = rng.uniform(-bound, bound);
  Layer l;
  l.in = in;
  l.out = out;
  l.W = Tensor::from_values({out, in}, std::move(w), true);
  l.b = Tensor::zeros({out}, true);
  return l;
}

Tensor net_forward(const std::vector<Layer>& net, const Tensor& x) {
  Tensor h = x;
  for (std::size_t i = 0; i < net.size(); ++i) {
    h = dgwm::add_rowvec(dgwm::matmul_nt(h, net[i].W), net[i].b);
    if (i + 1 < net.size()) h = dgwm::relu(h);
  }
  return h;
}

std::vector<double> net_forward_values(const std::vector<Layer>& net,
                                       std::span<const double> x) {
  std::vector<double> h(x.begin(), x.end());
  for (std::size_t i = 0; i < net.size(); ++i) {
    const std::vector<double>& w = net[i].W.value();
    const std::vector<double>& bias = net[i].b.value();
    std::vector<double> y(static_cast<std::size_t>(net[i].out));
    for (int j = 0; j < net[i].out; ++j) {
      double acc = 0.0;
      for (int t = 0; t < net[i].in; ++t) acc += h[t] * w[j * net[i].in + t];
      y[j] = acc + bias[j];
    }
    h = std::move(y);
    if (i + 1 < net.size()) {
      for (double& v : h) v = v > 0.0 ? v : 0.0;
    }
  }
  return h;
}

Tensor rows_tensor(const std::vector<std::vector<double>>& rows) {
  const int m = static_cast<int>(rows.size());
  const int n = static_cast<int>(rows.front().size());
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m) * n);
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return Tensor::from_values({m, n}, std::move(flat));
}

Tensor batch_ce(const std::vector<Layer>& net, const Tensor& W_cls,
                const std::vector<std::vector<double>>& views,
                const std::vector<int>& labels) {
  Tensor feats = net_forward(net, rows_tensor(views));
  Tensor logits = dgwm::matmul_nt(feats, W_cls);
  Tensor acc;
  for (std::size_t i = 0; i < views.size(); ++i) {
    Tensor ce = dgwm::cross_entropy(
        dgwm::pick_row(logits, static_cast<int>(i)), labels[i]);
    acc = i == 0 ? ce : dgwm::add(acc, ce);
  }
  return dgwm::scale(acc, 1.0 / static_cast<double>(views.size()));
}

struct MomentumBuffer {
  Tensor param;
  std::vector<double> velocity;
  bool backbone;
};

}  // namespace

std::vector<double> run_fixmatch(const dgwm::TrainingView& view,
                                 const dgwm::TrainConfig& tcfg,
                                 dgwm::ModelConfig mcfg) {
  mcfg.input_dim = view.data->input_dim();
  mcfg.num_classes = view.data->num_classes();
  const int d = mcfg.feature_dim;
  const int C = mcfg.num_classes;

  dgwm::Rng init_rng(tcfg.seed);
  std::vector<Layer> net;
  int cur = mcfg.input_dim;
  for (int h : mcfg.hidden) {
    net.push_back(draw_layer(cur, h, init_rng));
    cur = h;
  }
  net.push_back(draw_layer(cur, d, init_rng));
  // The production classifier starts at a tenth-of-a-twentieth of the usual
  // fan-in range; replicate the exact bound or the very first logits differ.
  const double w_bound = 0.05 / std::sqrt(static_cast<double>(d));
  std::vector<double> wv(static_cast<std::size_t>(C) * d);
  for (double& v : wv) v = init_rng.uniform(-w_bound, w_bound);
  Tensor W_cls = Tensor::from_values({C, d}, std::move(wv), true);

  dgwm::Rng data_rng(tcfg.seed ^ 0x9E3779B97F4A7C15ULL);
  dgwm::Augmenter aug = dgwm::Augmenter::fit(view);

  std::vector<MomentumBuffer> opt;
  for (const Layer& l : net) {
    opt.push_back({l.W, {}, true});
    opt.push_back({l.b, {}, true});
  }
  opt.push_back({W_cls, {}, false});

  std::vector<double> losses;
  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    const double phase = tcfg.epochs == 0
                             ? 0.0
                             : std::numbers::pi * static_cast<double>(epoch) /
                                   tcfg.epochs;
    const double lr_backbone =
        tcfg.sgd.lr_backbone * 0.5 * (1.0 + std::cos(phase));
    const double lr_head = tcfg.sgd.lr_head * 0.5 * (1.0 + std::cos(phase));
    for (int step = 0; step < tcfg.steps_per_epoch; ++step) {
      dgwm::StepBatch sb = dgwm::sample_step_batches(
          view, tcfg.labeled_batch, tcfg.unlabeled_batch, data_rng);
      Tensor total;
      for (std::size_t k = 0; k < sb.domains.size(); ++k) {
        const dgwm::DomainBatch& batch = sb.domains[k];

        std::vector<std::vector<double>> weak_views;
        weak_views.reserve(batch.unlabeled_x.size());
        for (const auto& u : batch.unlabeled_x) {
          weak_views.push_back(aug.weak(u, data_rng));
        }
        const std::vector<double>& cls = W_cls.value();
        std::vector<int> accepted;
        std::vector<int> plabels;
        for (std::size_t i = 0; i < weak_views.size(); ++i) {
          std::vector<double> feat = net_forward_values(net, weak_views[i]);
          std::vector<double> logits(C, 0.0);
          for (int c = 0; c < C; ++c) {
            double acc = 0.0;
            for (int j = 0; j < d; ++j) acc += cls[c * d + j] * feat[j];
            logits[c] = acc;
          }
          std::vector<double> probs = dgwm::softmax_values(logits);
          const int label = dgwm::argmax(probs);
          if (probs[label] >= tcfg.tau) {
            accepted.push_back(static_cast<int>(i));
            plabels.push_back(label);
          }
        }
        std::vector<std::vector<double>> strong_views;
        strong_views.reserve(accepted.size());
        for (int idx : accepted) {
          strong_views.push_back(aug.strong(batch.unlabeled_x[idx], data_rng));
        }
        std::vector<std::vector<double>> labeled_views;
        labeled_views.reserve(batch.labeled_x.size());
        for (const auto& x : batch.labeled_x) {
          labeled_views.push_back(aug.weak(x, data_rng));
        }

        Tensor l_lab;
        if (!labeled_views.empty()) {
          l_lab = batch_ce(net, W_cls, labeled_views, batch.labeled_y);
        }
        Tensor l_unl = strong_views.empty()
                           ? Tensor::scalar(0.0)
                           : batch_ce(net, W_cls, strong_views, plabels);
        Tensor lk;
        if (l_lab.defined()) {
          lk = dgwm::add(l_lab, l_unl);
        } else {
          lk = l_unl;
        }
        total = k == 0 ? lk : dgwm::add(total, lk);
      }
      losses.push_back(total.item());

      for (MomentumBuffer& mb : opt) mb.param.zero_grad();
      if (total.requires_grad()) total.backward();
      for (MomentumBuffer& mb : opt) {
        if (!mb.param.has_grad()) continue;
        std::vector<double> values = mb.param.value();
        const std::vector<double>& grads = mb.param.grad();
        if (mb.velocity.size() != values.size()) {
          mb.velocity.assign(values.size(), 0.0);
        }
        const double lr = mb.backbone ? lr_backbone : lr_head;
        for (std::size_t i = 0; i < values.size(); ++i) {
          mb.velocity[i] = tcfg.sgd.momentum * mb.velocity[i] + grads[i];
          values[i] -= lr * mb.velocity[i];
        }
        mb.param.set_value(values);
      }
    }
  }
  return losses;
}

}  // namespace refimpl
