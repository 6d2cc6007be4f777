#include "fedledger/nn/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "fedledger/error.hpp"
#include "fedledger/util/rng.hpp"

namespace fedledger::nn {

namespace {

struct Offsets {
  Eigen::Index conv_w = 0;
  Eigen::Index conv_b = 0;
  Eigen::Index w1 = 0;
  Eigen::Index b1 = 0;
  Eigen::Index w2 = 0;
  Eigen::Index b2 = 0;
  Eigen::Index total = 0;
};

Offsets layout(const ModelConfig& c) {
  Offsets o;
  Eigen::Index off = 0;
  if (c.has_conv()) {
    o.conv_w = off;
    off += static_cast<Eigen::Index>(c.conv_filters) * c.conv_kernel *
           c.conv_kernel * c.channels;
    o.conv_b = off;
    off += c.conv_filters;
  }
  Eigen::Index feat = c.feature_dim();
  if (c.has_hidden()) {
    o.w1 = off;
    off += static_cast<Eigen::Index>(c.hidden_units) * feat;
    o.b1 = off;
    off += c.hidden_units;
    feat = c.hidden_units;
  }
  o.w2 = off;
  off += static_cast<Eigen::Index>(c.num_classes) * feat;
  o.b2 = off;
  off += c.num_classes;
  o.total = off;
  return o;
}

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MapMat = Eigen::Map<const Mat<Scalar>>;

// Forward/backward state for one batch.
template <typename Scalar>
struct Workspace {
  Mat<Scalar> cols;       // (n*positions) x (k*k*C) im2col matrix
  Mat<Scalar> conv_act;   // (n*positions) x filters, post-relu
  std::vector<int> pool_src;  // feature -> row in conv_act, per sample
  Mat<Scalar> feat;       // n x feature_dim
  Mat<Scalar> hidden_raw; // n x hidden, post-relu pre-dropout
  Mat<Scalar> hidden;     // n x hidden, after dropout (== hidden_raw if none)
  Mat<Scalar> logits;     // n x classes
  Mat<Scalar> probs;      // n x classes
};

// dropout_mask: n x hidden matrix of {0, 1/(1-rate)} factors, or nullptr.
template <typename Scalar>
void forward_pass(const ModelConfig& c, const Vec<Scalar>& p,
                  const Mat<Scalar>& x, Workspace<Scalar>& ws,
                  const Mat<Scalar>* dropout_mask) {
  const Offsets off = layout(c);
  const Eigen::Index n = x.rows();

  if (c.has_conv()) {
    const int k = c.conv_kernel;
    const int oh = c.conv_out_h();
    const int ow = c.conv_out_w();
    const Eigen::Index positions = static_cast<Eigen::Index>(oh) * ow;
    const Eigen::Index patch = static_cast<Eigen::Index>(k) * k * c.channels;

    ws.cols.resize(n * positions, patch);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int cy = 0; cy < oh; ++cy) {
        for (int cx = 0; cx < ow; ++cx) {
          const Eigen::Index row = i * positions + cy * ow + cx;
          Eigen::Index col = 0;
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              for (int ch = 0; ch < c.channels; ++ch) {
                const Eigen::Index px =
                    (static_cast<Eigen::Index>(cy + ky) * c.width + (cx + kx)) *
                        c.channels + ch;
                ws.cols(row, col++) = x(i, px);
              }
            }
          }
        }
      }
    }

    MapMat<Scalar> wc(p.data() + off.conv_w, c.conv_filters, patch);
    ws.conv_act.noalias() = ws.cols * wc.transpose();
    ws.conv_act.rowwise() +=
        p.segment(off.conv_b, c.conv_filters).transpose();
    ws.conv_act = ws.conv_act.cwiseMax(Scalar(0));

    // Max-pool, ties to the first (row-major) position.
    const int ph = c.pool_out_h();
    const int pw = c.pool_out_w();
    const Eigen::Index feat_dim = c.feature_dim();
    ws.feat.resize(n, feat_dim);
    ws.pool_src.assign(static_cast<std::size_t>(n) * feat_dim, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int f = 0; f < c.conv_filters; ++f) {
        for (int py = 0; py < ph; ++py) {
          for (int px = 0; px < pw; ++px) {
            Scalar best = -std::numeric_limits<Scalar>::infinity();
            Eigen::Index best_row = 0;
            for (int dy = 0; dy < c.pool; ++dy) {
              for (int dx = 0; dx < c.pool; ++dx) {
                const Eigen::Index pos =
                    static_cast<Eigen::Index>(py * c.pool + dy) * ow +
                    (px * c.pool + dx);
                const Eigen::Index row = i * positions + pos;
                if (ws.conv_act(row, f) > best) {
                  best = ws.conv_act(row, f);
                  best_row = row;
                }
              }
            }
            const Eigen::Index fi =
                static_cast<Eigen::Index>(f) * ph * pw + py * pw + px;
            ws.feat(i, fi) = best;
            ws.pool_src[static_cast<std::size_t>(i * feat_dim + fi)] =
                static_cast<int>(best_row);
          }
        }
      }
    }
  } else {
    ws.feat = x;
  }

  const Mat<Scalar>* dense_in = &ws.feat;
  if (c.has_hidden()) {
    MapMat<Scalar> w1(p.data() + off.w1, c.hidden_units, c.feature_dim());
    ws.hidden_raw.noalias() = ws.feat * w1.transpose();
    ws.hidden_raw.rowwise() += p.segment(off.b1, c.hidden_units).transpose();
    ws.hidden_raw = ws.hidden_raw.cwiseMax(Scalar(0));
    if (dropout_mask != nullptr) {
      ws.hidden = ws.hidden_raw.cwiseProduct(*dropout_mask);
    } else {
      ws.hidden = ws.hidden_raw;
    }
    dense_in = &ws.hidden;
  }

  const Eigen::Index last_in = c.has_hidden() ? c.hidden_units : c.feature_dim();
  MapMat<Scalar> w2(p.data() + off.w2, c.num_classes, last_in);
  ws.logits.noalias() = *dense_in * w2.transpose();
  ws.logits.rowwise() += p.segment(off.b2, c.num_classes).transpose();

  ws.probs.resize(n, c.num_classes);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar m = ws.logits.row(i).maxCoeff();
    ws.probs.row(i) = (ws.logits.row(i).array() - m).exp();
    ws.probs.row(i) /= ws.probs.row(i).sum();
  }
}

// Mean cross-entropy from cached logits, always accumulated in double.
template <typename Scalar>
double mean_cross_entropy(const Workspace<Scalar>& ws,
                          const std::vector<int>& labels,
                          Eigen::Index begin) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < ws.logits.rows(); ++i) {
    const double m = static_cast<double>(ws.logits.row(i).maxCoeff());
    double lse = 0.0;
    for (Eigen::Index j = 0; j < ws.logits.cols(); ++j) {
      lse += std::exp(static_cast<double>(ws.logits(i, j)) - m);
    }
    const int y = labels[static_cast<std::size_t>(begin + i)];
    total -= static_cast<double>(ws.logits(i, y)) - m - std::log(lse);
  }
  return total / static_cast<double>(ws.logits.rows());
}

// Gradient of the mean cross-entropy wrt every parameter.
template <typename Scalar>
void backward_pass(const ModelConfig& c, const Vec<Scalar>& p,
                   const Mat<Scalar>& x, const Workspace<Scalar>& ws,
                   const std::vector<int>& labels, Eigen::Index begin,
                   const Mat<Scalar>* dropout_mask, Vec<Scalar>& grad) {
  const Offsets off = layout(c);
  const Eigen::Index n = x.rows();
  grad.setZero(off.total);

  Mat<Scalar> dlogits = ws.probs;
  for (Eigen::Index i = 0; i < n; ++i) {
    dlogits(i, labels[static_cast<std::size_t>(begin + i)]) -= Scalar(1);
  }
  dlogits /= static_cast<Scalar>(n);

  const Mat<Scalar>& dense_in = c.has_hidden() ? ws.hidden : ws.feat;
  const Eigen::Index last_in = c.has_hidden() ? c.hidden_units : c.feature_dim();

  Eigen::Map<Mat<Scalar>> dw2(grad.data() + off.w2, c.num_classes, last_in);
  dw2.noalias() = dlogits.transpose() * dense_in;
  grad.segment(off.b2, c.num_classes) = dlogits.colwise().sum();

  MapMat<Scalar> w2(p.data() + off.w2, c.num_classes, last_in);
  Mat<Scalar> dfeat;
  if (c.has_hidden()) {
    Mat<Scalar> dhidden = dlogits * w2;
    if (dropout_mask != nullptr) {
      dhidden = dhidden.cwiseProduct(*dropout_mask);
    }
    dhidden = dhidden.cwiseProduct(
        (ws.hidden_raw.array() > Scalar(0)).template cast<Scalar>().matrix());
    Eigen::Map<Mat<Scalar>> dw1(grad.data() + off.w1, c.hidden_units,
                                c.feature_dim());
    dw1.noalias() = dhidden.transpose() * ws.feat;
    grad.segment(off.b1, c.hidden_units) = dhidden.colwise().sum();
    MapMat<Scalar> w1(p.data() + off.w1, c.hidden_units, c.feature_dim());
    if (c.has_conv()) dfeat.noalias() = dhidden * w1;
  } else if (c.has_conv()) {
    dfeat.noalias() = dlogits * w2;
  }

  if (c.has_conv()) {
    const Eigen::Index positions =
        static_cast<Eigen::Index>(c.conv_out_h()) * c.conv_out_w();
    const Eigen::Index feat_dim = c.feature_dim();
    const int ph = c.pool_out_h();
    const int pw = c.pool_out_w();
    Mat<Scalar> dconv = Mat<Scalar>::Zero(n * positions, c.conv_filters);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index fi = 0; fi < feat_dim; ++fi) {
        const int f = static_cast<int>(fi / (static_cast<Eigen::Index>(ph) * pw));
        const int row = ws.pool_src[static_cast<std::size_t>(i * feat_dim + fi)];
        dconv(row, f) += dfeat(i, fi);
      }
    }
    dconv = dconv.cwiseProduct(
        (ws.conv_act.array() > Scalar(0)).template cast<Scalar>().matrix());
    const Eigen::Index patch =
        static_cast<Eigen::Index>(c.conv_kernel) * c.conv_kernel * c.channels;
    Eigen::Map<Mat<Scalar>> dwc(grad.data() + off.conv_w, c.conv_filters, patch);
    dwc.noalias() = dconv.transpose() * ws.cols;
    grad.segment(off.conv_b, c.conv_filters) = dconv.colwise().sum();
  }
}

template <typename Scalar>
Mat<Scalar> batch_rows(const Eigen::MatrixXf& inputs,
                       const std::vector<int>& order, Eigen::Index begin,
                       Eigen::Index count) {
  Mat<Scalar> out(count, inputs.cols());
  for (Eigen::Index i = 0; i < count; ++i) {
    out.row(i) =
        inputs.row(order[static_cast<std::size_t>(begin + i)]).cast<Scalar>();
  }
  return out;
}

void check_input_shape(const ModelConfig& c, Eigen::Index cols) {
  if (cols != c.input_dim()) {
    throw ShapeError("input dim " + std::to_string(cols) +
                     " does not match architecture dim " +
                     std::to_string(c.input_dim()));
  }
}

}  // namespace

Eigen::Index ModelConfig::param_dim() const { return layout(*this).total; }

void ModelConfig::validate() const {
  if (height < 1 || width < 1 || channels < 1) {
    throw PreconditionError("model: image dims must be positive");
  }
  if (num_classes < 2) {
    throw PreconditionError("model: need at least two classes");
  }
  if (has_conv()) {
    if (conv_kernel < 1 || conv_kernel > std::min(height, width)) {
      throw PreconditionError("model: conv kernel does not fit image");
    }
    if (pool < 1 || pool_out_h() < 1 || pool_out_w() < 1) {
      throw PreconditionError("model: pool window does not fit conv output");
    }
  }
  if (dropout < 0.0f || dropout >= 1.0f) {
    throw PreconditionError("model: dropout must be in [0,1)");
  }
}

Model Model::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Model m;
  m.config = config;
  m.params.resize(config.param_dim());
  Rng rng(seed);
  for (Eigen::Index i = 0; i < m.params.size(); ++i) {
    m.params[i] = static_cast<float>(rng.next_uniform(-0.05, 0.05));
  }
  return m;
}

Eigen::VectorXf forward(const Model& model,
                        const Eigen::Ref<const Eigen::VectorXf>& input) {
  check_input_shape(model.config, input.size());
  Mat<float> x(1, input.size());
  x.row(0) = input.transpose();
  Workspace<float> ws;
  Vec<float> p = model.params;
  forward_pass<float>(model.config, p, x, ws, nullptr);
  return ws.probs.row(0).transpose();
}

Eigen::MatrixXf forward_batch(const Model& model,
                              const Eigen::Ref<const Eigen::MatrixXf>& inputs) {
  check_input_shape(model.config, inputs.cols());
  Mat<float> x = inputs;
  Workspace<float> ws;
  Vec<float> p = model.params;
  forward_pass<float>(model.config, p, x, ws, nullptr);
  return ws.probs;
}

LossGrad loss_and_grad(const Model& model, const LabeledDataset& batch) {
  if (batch.empty()) throw PreconditionError("loss_and_grad: empty batch");
  check_input_shape(model.config, batch.inputs.cols());
  Mat<double> x = batch.inputs.cast<double>();
  Workspace<double> ws;
  Vec<double> p = model.params.cast<double>();
  forward_pass<double>(model.config, p, x, ws, nullptr);
  LossGrad out;
  out.loss = mean_cross_entropy(ws, batch.labels, 0);
  Vec<double> grad;
  backward_pass<double>(model.config, p, x, ws, batch.labels, 0, nullptr, grad);
  out.grad = grad;
  return out;
}

double eval_loss(const Model& model, const LabeledDataset& data) {
  if (data.empty()) throw PreconditionError("eval_loss: empty dataset");
  check_input_shape(model.config, data.inputs.cols());
  Mat<float> x = data.inputs;
  Workspace<float> ws;
  Vec<float> p = model.params;
  forward_pass<float>(model.config, p, x, ws, nullptr);
  return mean_cross_entropy(ws, data.labels, 0);
}

double eval_accuracy(const Model& model, const LabeledDataset& data) {
  if (data.empty()) throw PreconditionError("eval_accuracy: empty dataset");
  const Eigen::MatrixXf probs = forward_batch(model, data.inputs);
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index pred = 0;
    probs.row(i).maxCoeff(&pred);
    if (static_cast<int>(pred) == data.labels[static_cast<std::size_t>(i)]) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(probs.rows());
}

Model sgd_train(const Model& model, const LabeledDataset& data,
                const SgdOptions& options) {
  if (options.epochs < 1) throw PreconditionError("sgd_train: epochs >= 1");
  if (options.batch_size < 1) throw PreconditionError("sgd_train: batch_size >= 1");
  if (!(options.lr >= 0.0f)) throw PreconditionError("sgd_train: lr must be >= 0");
  if (data.empty()) throw PreconditionError("sgd_train: empty dataset");
  check_input_shape(model.config, data.inputs.cols());

  Model out = model;
  Rng rng(options.seed);
  std::vector<int> order(static_cast<std::size_t>(data.size()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  const bool use_dropout = model.config.dropout > 0.0f && model.config.has_hidden();
  const float keep = 1.0f - model.config.dropout;

  long step = 0;
  Workspace<float> ws;
  Vec<float> grad;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(order);
    for (Eigen::Index begin = 0; begin < data.size();
         begin += options.batch_size, ++step) {
      const Eigen::Index count =
          std::min<Eigen::Index>(options.batch_size, data.size() - begin);
      Mat<float> x = batch_rows<float>(data.inputs, order, begin, count);
      std::vector<int> batch_labels(static_cast<std::size_t>(count));
      for (Eigen::Index i = 0; i < count; ++i) {
        batch_labels[static_cast<std::size_t>(i)] =
            data.labels[static_cast<std::size_t>(order[static_cast<std::size_t>(begin + i)])];
      }

      Mat<float> mask;
      if (use_dropout) {
        mask.resize(count, model.config.hidden_units);
        for (Eigen::Index i = 0; i < mask.size(); ++i) {
          mask.data()[i] =
              rng.next_unit() < keep ? 1.0f / keep : 0.0f;
        }
      }

      Vec<float> p = out.params;
      forward_pass<float>(model.config, p, x, ws,
                          use_dropout ? &mask : nullptr);
      const double loss = mean_cross_entropy(ws, batch_labels, 0);
      if (!std::isfinite(loss)) {
        throw DivergenceError("sgd_train: non-finite loss", step);
      }
      backward_pass<float>(model.config, p, x, ws, batch_labels, 0,
                           use_dropout ? &mask : nullptr, grad);
      out.params -= options.lr * grad;
    }
  }
  return out;
}

Eigen::VectorXd per_sample_sq_grad(const Model& model,
                                   const LabeledDataset& data) {
  if (data.empty()) throw PreconditionError("per_sample_sq_grad: empty dataset");
  check_input_shape(model.config, data.inputs.cols());
  Vec<double> p = model.params.cast<double>();
  Eigen::VectorXd accum = Eigen::VectorXd::Zero(model.config.param_dim());
  Workspace<double> ws;
  Vec<double> grad;
  Mat<double> x(1, data.inputs.cols());
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    x.row(0) = data.inputs.row(i).cast<double>();
    forward_pass<double>(model.config, p, x, ws, nullptr);
    backward_pass<double>(model.config, p, x, ws, data.labels, i, nullptr, grad);
    // Per-sample cross-entropy gradient is minus the log-likelihood
    // gradient; the square is the same either way.
    accum.array() += grad.array().square();
  }
  return accum / static_cast<double>(data.size());
}

}  // namespace fedledger::nn
