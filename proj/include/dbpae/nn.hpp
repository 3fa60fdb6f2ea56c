#pragma once

#include <map>
#include <string>
#include <vector>

#include "dbpae/rng.hpp"
#include "dbpae/tape.hpp"
#include "dbpae/tensor.hpp"

namespace dbpae {

// Named parameter tensors plus per-parameter optimizer state. Shapes are fixed
// once a name is inserted; mutation is single-writer.
class ParamStore {
 public:
  struct Entry {
    Tensor value;
    std::vector<double> m, v;  // Adam moments, sized on first update
    std::int64_t step = 0;
  };

  void insert(const std::string& name, Tensor value);
  const Tensor& at(const std::string& name) const;
  void set(const std::string& name, Tensor value);  // shape must match
  bool contains(const std::string& name) const;
  std::vector<std::string> names() const;  // sorted
  std::size_t size() const { return entries_.size(); }

  Entry& entry(const std::string& name);

 private:
  std::map<std::string, Entry> entries_;
};

// Parameters lifted onto one tape for a forward/backward pass.
class TapedParams {
 public:
  TapedParams(Tape& tape, ParamStore& store, bool trainable);
  Var at(const std::string& name) const;
  // backward results for every trainable parameter, keyed by name
  std::map<std::string, Tensor> gradients(const GradientMap& gm) const;
  std::vector<Var> vars() const;

 private:
  std::map<std::string, Var> vars_;
};

// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases.
void add_linear(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                Rng& rng);
// Gate layout [input forget cell output] along the 4H axis; forget bias 1.
void add_lstm(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t hidden,
              Rng& rng);

// Fully-connected stack fc1..fcN over the given layer dimensions.
ParamStore init_params(const std::vector<std::size_t>& dims, Rng& rng);

// y = x W + b for x [B,in], W [in,out], b [out]
Var linear(Tape& tape, Var x, Var w, Var b);
Var linear(Tape& tape, const TapedParams& p, const std::string& prefix, Var x);

struct LstmState {
  Var h, c;
};
LstmState lstm_zero_state(Tape& tape, std::size_t batch, std::size_t hidden);
LstmState lstm_step(Tape& tape, const TapedParams& p, const std::string& prefix, Var x,
                    const LstmState& prev);

// mu + sigma * eps with eps ~ N(0,1) held constant on the tape.
Var reparam_sample(Tape& tape, Var mu, Var sigma, Rng& rng);
// Same with caller-supplied eps; skips the sigma positivity check.
Var reparam_with_eps(Tape& tape, Var mu, Var sigma, const Tensor& eps);

Tensor standard_normal(const Shape& shape, Rng& rng);

class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamStore& store, const std::map<std::string, Tensor>& grads) const;

  // Standalone variant for ad-hoc variables (attack perturbations).
  struct State {
    std::vector<double> m, v;
    std::int64_t step = 0;
  };
  void update(State& st, std::vector<double>& value, std::span<const double> grad) const;

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, eps_;
};

}  // namespace dbpae
