#pragma once

// Minimal DDPG agent supplying the deterministic base policy: two small
// MLPs with manual backpropagation, Adam, a ring replay buffer, and
// softly updated target networks. Exploration noise is NOT generated
// here; the safety layer owns it.

#include "safex/core.hpp"
#include "safex/random.hpp"

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace safex::rl {

// Fully connected net, rectifier hidden units, optionally tanh output
// scaled by an action bound. Batches are column-major (one sample per
// column).
class Mlp {
 public:
  struct Grads {
    std::vector<Matrix> dW;
    std::vector<Vector> db;
  };

  struct Cache {
    Matrix input;
    std::vector<Matrix> z;  // pre-activations per layer
    std::vector<Matrix> a;  // post-activations per layer
  };

  Mlp(std::vector<int> sizes, bool tanh_output, double output_scale, Rng& rng,
      double final_init_scale = -1.0)
      : sizes_(std::move(sizes)), tanh_output_(tanh_output), output_scale_(output_scale) {
    require_domain(sizes_.size() >= 2, "Mlp: need at least input and output sizes");
    const std::size_t layers = sizes_.size() - 1;
    W.resize(layers);
    b.resize(layers);
    for (std::size_t l = 0; l < layers; ++l) {
      const int fan_in = sizes_[l];
      const int fan_out = sizes_[l + 1];
      double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      if (l == layers - 1 && final_init_scale > 0.0) bound = final_init_scale;
      W[l].resize(fan_out, fan_in);
      b[l].resize(fan_out);
      for (Eigen::Index i = 0; i < W[l].size(); ++i) W[l].data()[i] = rng.uniform(-bound, bound);
      for (Eigen::Index i = 0; i < b[l].size(); ++i) b[l][i] = rng.uniform(-bound, bound);
    }
  }

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  bool tanh_output() const { return tanh_output_; }
  double output_scale() const { return output_scale_; }

  Matrix forward_batch(const Matrix& X, Cache* cache = nullptr) const {
    require_shape(X.rows() == sizes_.front(), "Mlp::forward_batch: input rows");
    if (cache) {
      cache->input = X;
      cache->z.clear();
      cache->a.clear();
    }
    Matrix a = X;
    for (std::size_t l = 0; l < W.size(); ++l) {
      Matrix z = (W[l] * a).colwise() + b[l];
      if (l + 1 < W.size()) {
        a = z.cwiseMax(0.0);
      } else if (tanh_output_) {
        a = output_scale_ * z.array().tanh().matrix();
      } else {
        a = z;
      }
      if (cache) {
        cache->z.push_back(z);
        cache->a.push_back(a);
      }
    }
    return a;
  }

  Vector forward(const Vector& x) const { return forward_batch(x); }

  // dY = dL/d(output); accumulates parameter gradients and returns dL/dX.
  Matrix backward_batch(const Cache& cache, const Matrix& dY, Grads& g) const {
    const std::size_t layers = W.size();
    Matrix dz;
    if (tanh_output_) {
      const Matrix& y = cache.a.back();  // = scale * tanh(z)
      dz = dY.cwiseProduct(Matrix::Constant(y.rows(), y.cols(), output_scale_) -
                           y.cwiseProduct(y) / output_scale_);
    } else {
      dz = dY;
    }
    for (std::size_t l = layers; l-- > 0;) {
      const Matrix& a_prev = (l == 0) ? cache.input : cache.a[l - 1];
      g.dW[l] += dz * a_prev.transpose();
      g.db[l] += dz.rowwise().sum();
      if (l == 0) return W[l].transpose() * dz;
      Matrix da = W[l].transpose() * dz;
      dz = da.cwiseProduct((cache.z[l - 1].array() > 0.0).cast<double>().matrix());
    }
    return Matrix();
  }

  Grads zero_grads() const {
    Grads g;
    g.dW.reserve(W.size());
    g.db.reserve(b.size());
    for (std::size_t l = 0; l < W.size(); ++l) {
      g.dW.push_back(Matrix::Zero(W[l].rows(), W[l].cols()));
      g.db.push_back(Vector::Zero(b[l].size()));
    }
    return g;
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < W.size(); ++l)
      n += static_cast<std::size_t>(W[l].size() + b[l].size());
    return n;
  }

  std::vector<double> flat_params() const {
    std::vector<double> out;
    out.reserve(param_count());
    for (std::size_t l = 0; l < W.size(); ++l) {
      out.insert(out.end(), W[l].data(), W[l].data() + W[l].size());
      out.insert(out.end(), b[l].data(), b[l].data() + b[l].size());
    }
    return out;
  }

  void set_flat_params(const std::vector<double>& p) {
    require_shape(p.size() == param_count(), "Mlp::set_flat_params: size");
    std::size_t at = 0;
    for (std::size_t l = 0; l < W.size(); ++l) {
      std::copy(p.begin() + at, p.begin() + at + W[l].size(), W[l].data());
      at += static_cast<std::size_t>(W[l].size());
      std::copy(p.begin() + at, p.begin() + at + b[l].size(), b[l].data());
      at += static_cast<std::size_t>(b[l].size());
    }
  }

  static std::vector<double> flat_grads(const Grads& g) {
    std::vector<double> out;
    for (std::size_t l = 0; l < g.dW.size(); ++l) {
      out.insert(out.end(), g.dW[l].data(), g.dW[l].data() + g.dW[l].size());
      out.insert(out.end(), g.db[l].data(), g.db[l].data() + g.db[l].size());
    }
    return out;
  }

  std::vector<Matrix> W;
  std::vector<Vector> b;

 private:
  std::vector<int> sizes_;
  bool tanh_output_;
  double output_scale_;
};

// Adam with per-tensor moment estimates.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(Mlp& net, const Mlp::Grads& g) {
    if (mW_.empty()) {
      for (std::size_t l = 0; l < net.W.size(); ++l) {
        mW_.push_back(Matrix::Zero(net.W[l].rows(), net.W[l].cols()));
        vW_.push_back(Matrix::Zero(net.W[l].rows(), net.W[l].cols()));
        mb_.push_back(Vector::Zero(net.b[l].size()));
        vb_.push_back(Vector::Zero(net.b[l].size()));
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t l = 0; l < net.W.size(); ++l) {
      mW_[l] = beta1_ * mW_[l] + (1.0 - beta1_) * g.dW[l];
      vW_[l] = beta2_ * vW_[l] + (1.0 - beta2_) * g.dW[l].cwiseProduct(g.dW[l]);
      net.W[l] -= lr_ * (mW_[l] / bc1).cwiseQuotient(((vW_[l] / bc2).cwiseSqrt().array() + eps_).matrix());
      mb_[l] = beta1_ * mb_[l] + (1.0 - beta1_) * g.db[l];
      vb_[l] = beta2_ * vb_[l] + (1.0 - beta2_) * g.db[l].cwiseProduct(g.db[l]);
      net.b[l] -= lr_ * (mb_[l] / bc1).cwiseQuotient(((vb_[l] / bc2).cwiseSqrt().array() + eps_).matrix());
    }
  }

  double learning_rate() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Matrix> mW_, vW_;
  std::vector<Vector> mb_, vb_;
};

struct Transition {
  Vector x;
  Vector u;
  double cost;
  Vector x_next;
};

// Ring buffer; oldest transition evicted at capacity. Minibatches are
// drawn uniformly without replacement.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    require_domain(capacity_ >= 1, "ReplayBuffer: capacity must be positive");
  }

  void store(Transition t) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(t));
    } else {
      data_[head_] = std::move(t);
    }
    head_ = (head_ + 1) % capacity_;
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& operator[](std::size_t i) const { return data_[i]; }

  std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const {
    require_domain(batch <= data_.size(), "ReplayBuffer: sample larger than buffer");
    std::vector<std::size_t> idx(data_.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < batch; ++i) {
      std::size_t j = i + rng.uniform_index(idx.size() - i);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(batch);
    return idx;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Transition> data_;
};

struct DdpgConfig {
  int hidden = 64;  // width of each of the two hidden layers
  double actor_lr = 1e-3;
  double critic_lr = 2e-3;
  double gamma = 0.99;
  double soft_tau = 5e-3;
  int batch = 64;
  std::size_t capacity = 500000;
  double action_bound = 2.0;
};

class DdpgAgent {
 public:
  DdpgAgent(int state_dim, int input_dim, const DdpgConfig& cfg, std::uint64_t seed)
      : cfg_(cfg),
        rng_init_(seed),
        actor_({state_dim, cfg.hidden, cfg.hidden, input_dim}, true, cfg.action_bound, rng_init_, 3e-3),
        critic_({state_dim + input_dim, cfg.hidden, cfg.hidden, 1}, false, 1.0, rng_init_),
        target_actor_(actor_),
        target_critic_(critic_),
        actor_opt_(cfg.actor_lr),
        critic_opt_(cfg.critic_lr),
        state_dim_(state_dim),
        input_dim_(input_dim) {}

  const DdpgConfig& config() const { return cfg_; }
  int state_dim() const { return state_dim_; }
  int input_dim() const { return input_dim_; }

  Vector policy_mean(const Vector& x) const { return actor_.forward(x); }

  Mlp& actor() { return actor_; }
  Mlp& critic() { return critic_; }
  Mlp& target_actor() { return target_actor_; }
  Mlp& target_critic() { return target_critic_; }
  const Mlp& actor() const { return actor_; }
  const Mlp& critic() const { return critic_; }

  // One gradient step on critic then actor from a uniform minibatch,
  // followed by soft target updates. Reward is the negated cost.
  // Returns (critic loss, actor objective), or nothing when the buffer
  // is still smaller than a minibatch.
  std::optional<std::pair<double, double>> train_step(const ReplayBuffer& buffer, Rng& rng) {
    const int B = cfg_.batch;
    if (buffer.size() < static_cast<std::size_t>(B)) {
      if (!warned_small_buffer_) {
        std::fprintf(stderr, "ddpg: skipping training, buffer %zu < minibatch %d\n",
                     buffer.size(), B);
        warned_small_buffer_ = true;
      }
      return std::nullopt;
    }
    const std::vector<std::size_t> idx = buffer.sample_indices(static_cast<std::size_t>(B), rng);
    Matrix X(state_dim_, B), U(input_dim_, B), Xn(state_dim_, B);
    Vector reward(B);
    for (int i = 0; i < B; ++i) {
      const Transition& t = buffer[idx[static_cast<std::size_t>(i)]];
      X.col(i) = t.x;
      U.col(i) = t.u;
      Xn.col(i) = t.x_next;
      reward[i] = -t.cost;
    }

    // critic target y = r + gamma * Q'(x', mu'(x'))
    Matrix an = target_actor_.forward_batch(Xn);
    Matrix xan(state_dim_ + input_dim_, B);
    xan << Xn, an;
    Matrix qn = target_critic_.forward_batch(xan);
    Vector y = reward + cfg_.gamma * qn.row(0).transpose();

    Matrix xu(state_dim_ + input_dim_, B);
    xu << X, U;
    Mlp::Cache ccache;
    Matrix q = critic_.forward_batch(xu, &ccache);
    Vector diff = q.row(0).transpose() - y;
    const double critic_loss = diff.squaredNorm() / B;
    Mlp::Grads cgrads = critic_.zero_grads();
    critic_.backward_batch(ccache, (2.0 / B) * diff.transpose(), cgrads);
    critic_opt_.step(critic_, cgrads);

    // actor ascends Q(x, mu(x)): descend on -mean Q
    Mlp::Cache acache;
    Matrix a = actor_.forward_batch(X, &acache);
    Matrix xa(state_dim_ + input_dim_, B);
    xa << X, a;
    Mlp::Cache qcache;
    Matrix qa = critic_.forward_batch(xa, &qcache);
    const double actor_objective = qa.row(0).mean();
    Mlp::Grads scratch = critic_.zero_grads();
    Matrix dxu = critic_.backward_batch(qcache, Matrix::Constant(1, B, -1.0 / B), scratch);
    Mlp::Grads agrads = actor_.zero_grads();
    actor_.backward_batch(acache, dxu.bottomRows(input_dim_), agrads);
    actor_opt_.step(actor_, agrads);

    soft_update_targets();
    return std::make_pair(critic_loss, actor_objective);
  }

  // theta_target <- tau * theta + (1 - tau) * theta_target
  void soft_update_targets(double tau_override = -1.0) {
    const double t = tau_override >= 0.0 ? tau_override : cfg_.soft_tau;
    blend(target_actor_, actor_, t);
    blend(target_critic_, critic_, t);
  }

  void save_checkpoint(std::ostream& os) const {
    os << "safex-ddpg v1\n";
    os << state_dim_ << " " << input_dim_ << " " << cfg_.hidden << " " << cfg_.action_bound << "\n";
    write_net(os, "actor", actor_);
    write_net(os, "critic", critic_);
    write_net(os, "target_actor", target_actor_);
    write_net(os, "target_critic", target_critic_);
  }

  void save_checkpoint(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open checkpoint file for writing: " + path);
    save_checkpoint(f);
  }

  void load_checkpoint(std::istream& is) {
    std::string magic, version;
    is >> magic >> version;
    if (magic != "safex-ddpg" || version != "v1")
      throw std::runtime_error("checkpoint: unrecognized header");
    int n, m, hidden;
    double bound;
    is >> n >> m >> hidden >> bound;
    if (n != state_dim_ || m != input_dim_ || hidden != cfg_.hidden)
      throw std::runtime_error("checkpoint: shape header does not match agent");
    read_net(is, "actor", actor_);
    read_net(is, "critic", critic_);
    read_net(is, "target_actor", target_actor_);
    read_net(is, "target_critic", target_critic_);
  }

  void load_checkpoint(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open checkpoint file: " + path);
    load_checkpoint(f);
  }

 private:
  static void blend(Mlp& target, const Mlp& online, double t) {
    for (std::size_t l = 0; l < target.W.size(); ++l) {
      target.W[l] = t * online.W[l] + (1.0 - t) * target.W[l];
      target.b[l] = t * online.b[l] + (1.0 - t) * target.b[l];
    }
  }

  static void write_net(std::ostream& os, const std::string& name, const Mlp& net) {
    char buf[32];
    for (std::size_t l = 0; l < net.W.size(); ++l) {
      os << "tensor " << name << ".W" << l << " " << net.W[l].rows() << " " << net.W[l].cols() << "\n";
      for (Eigen::Index i = 0; i < net.W[l].size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", net.W[l].data()[i]);
        os << buf << (i + 1 == net.W[l].size() ? "\n" : " ");
      }
      os << "tensor " << name << ".b" << l << " " << net.b[l].size() << " 1\n";
      for (Eigen::Index i = 0; i < net.b[l].size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", net.b[l][i]);
        os << buf << (i + 1 == net.b[l].size() ? "\n" : " ");
      }
    }
  }

  static void read_net(std::istream& is, const std::string& name, Mlp& net) {
    for (std::size_t l = 0; l < net.W.size(); ++l) {
      read_tensor(is, name + ".W" + std::to_string(l), net.W[l].data(), net.W[l].rows(), net.W[l].cols());
      read_tensor(is, name + ".b" + std::to_string(l), net.b[l].data(), net.b[l].size(), 1);
    }
  }

  static void read_tensor(std::istream& is, const std::string& expect, double* data,
                          Eigen::Index rows, Eigen::Index cols) {
    std::string kw, nm;
    Eigen::Index r, c;
    is >> kw >> nm >> r >> c;
    if (kw != "tensor" || nm != expect || r != rows || c != cols)
      throw std::runtime_error("checkpoint: bad tensor record, expected " + expect);
    for (Eigen::Index i = 0; i < rows * cols; ++i) is >> data[i];
    if (!is) throw std::runtime_error("checkpoint: truncated tensor " + expect);
  }

  DdpgConfig cfg_;
  Rng rng_init_;
  Mlp actor_, critic_, target_actor_, target_critic_;
  Adam actor_opt_, critic_opt_;
  int state_dim_, input_dim_;
  bool warned_small_buffer_ = false;
};

// (discounted J = sum_k gamma^k c_{k+1}, undiscounted sum).
inline std::pair<double, double> episode_return(const std::vector<double>& costs, double gamma) {
  double discounted = 0.0, plain = 0.0, w = 1.0;
  for (double c : costs) {
    discounted += w * c;
    plain += c;
    w *= gamma;
  }
  return {discounted, plain};
}

}  // namespace safex::rl
