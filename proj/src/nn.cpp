#include "dbpae/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace dbpae {

void ParamStore::insert(const std::string& name, Tensor value) {
  if (entries_.count(name)) throw std::logic_error("ParamStore: duplicate name " + name);
  entries_[name] = Entry{std::move(value), {}, {}, 0};
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("ParamStore: unknown parameter " + name);
  return it->second.value;
}

void ParamStore::set(const std::string& name, Tensor value) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("ParamStore: unknown parameter " + name);
  if (it->second.value.shape() != value.shape())
    throw std::logic_error("ParamStore: shape change for " + name);
  it->second.value = std::move(value);
}

bool ParamStore::contains(const std::string& name) const { return entries_.count(name) > 0; }

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [k, _] : entries_) out.push_back(k);
  return out;
}

ParamStore::Entry& ParamStore::entry(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("ParamStore: unknown parameter " + name);
  return it->second;
}

TapedParams::TapedParams(Tape& tape, ParamStore& store, bool trainable) {
  for (const auto& name : store.names()) vars_[name] = tape.leaf(store.at(name), trainable);
}

Var TapedParams::at(const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw std::out_of_range("TapedParams: unknown parameter " + name);
  return it->second;
}

std::map<std::string, Tensor> TapedParams::gradients(const GradientMap& gm) const {
  std::map<std::string, Tensor> out;
  for (const auto& [name, var] : vars_) out[name] = gm.value(var);
  return out;
}

std::vector<Var> TapedParams::vars() const {
  std::vector<Var> out;
  out.reserve(vars_.size());
  for (const auto& [_, var] : vars_) out.push_back(var);
  return out;
}

namespace {
Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> d(shape_size(shape));
  for (double& v : d) v = rng.uniform(-bound, bound);
  return Tensor(std::move(shape), std::move(d));
}
}  // namespace

void add_linear(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                Rng& rng) {
  if (in == 0 || out == 0)
    throw std::invalid_argument("add_linear: dimensions must be positive for " + prefix);
  store.insert(prefix + ".W", uniform_init({in, out}, in, rng));
  store.insert(prefix + ".b", Tensor::zeros({out}));
}

void add_lstm(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t hidden,
              Rng& rng) {
  if (in == 0 || hidden == 0)
    throw std::invalid_argument("add_lstm: dimensions must be positive for " + prefix);
  store.insert(prefix + ".wx", uniform_init({in, 4 * hidden}, in, rng));
  store.insert(prefix + ".wh", uniform_init({hidden, 4 * hidden}, hidden, rng));
  std::vector<double> b(4 * hidden, 0.0);
  for (std::size_t j = hidden; j < 2 * hidden; ++j) b[j] = 1.0;  // forget gate
  store.insert(prefix + ".b", Tensor({4 * hidden}, std::move(b)));
}

ParamStore init_params(const std::vector<std::size_t>& dims, Rng& rng) {
  if (dims.size() < 2) throw std::invalid_argument("init_params: need at least two dimensions");
  ParamStore store;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i)
    add_linear(store, "fc" + std::to_string(i + 1), dims[i], dims[i + 1], rng);
  return store;
}

Var linear(Tape& tape, Var x, Var w, Var b) {
  Var y = tape.matmul(x, w);
  return tape.add(y, tape.broadcast_to(b, y.shape()));
}

Var linear(Tape& tape, const TapedParams& p, const std::string& prefix, Var x) {
  return linear(tape, x, p.at(prefix + ".W"), p.at(prefix + ".b"));
}

LstmState lstm_zero_state(Tape& tape, std::size_t batch, std::size_t hidden) {
  return {tape.constant(Tensor::zeros({batch, hidden})),
          tape.constant(Tensor::zeros({batch, hidden}))};
}

LstmState lstm_step(Tape& tape, const TapedParams& p, const std::string& prefix, Var x,
                    const LstmState& prev) {
  Var gates = tape.add(tape.matmul(x, p.at(prefix + ".wx")),
                       tape.matmul(prev.h, p.at(prefix + ".wh")));
  gates = tape.add(gates, tape.broadcast_to(p.at(prefix + ".b"), gates.shape()));
  std::size_t hidden = prev.h.shape()[1];
  Var gi = tape.sigmoid(tape.slice_cols(gates, 0, hidden));
  Var gf = tape.sigmoid(tape.slice_cols(gates, hidden, 2 * hidden));
  Var gg = tape.tanh(tape.slice_cols(gates, 2 * hidden, 3 * hidden));
  Var go = tape.sigmoid(tape.slice_cols(gates, 3 * hidden, 4 * hidden));
  Var c = tape.add(tape.mul(gf, prev.c), tape.mul(gi, gg));
  Var h = tape.mul(go, tape.tanh(c));
  return {h, c};
}

Tensor standard_normal(const Shape& shape, Rng& rng) {
  std::vector<double> d(shape_size(shape));
  for (double& v : d) v = rng.normal();
  return Tensor(shape, std::move(d));
}

Var reparam_sample(Tape& tape, Var mu, Var sigma, Rng& rng) {
  for (double s : sigma.value().data())
    if (!(s > 0.0))
      throw std::invalid_argument("reparam_sample: sigma must be positive elementwise");
  return reparam_with_eps(tape, mu, sigma, standard_normal(mu.shape(), rng));
}

Var reparam_with_eps(Tape& tape, Var mu, Var sigma, const Tensor& eps) {
  return tape.add(mu, tape.mul(sigma, tape.constant(eps)));
}

void Adam::step(ParamStore& store, const std::map<std::string, Tensor>& grads) const {
  for (const auto& [name, grad] : grads) {
    auto& e = store.entry(name);
    if (e.value.shape() != grad.shape())
      throw std::logic_error("Adam: gradient shape mismatch for " + name);
    std::size_t n = e.value.size();
    if (e.m.empty()) {
      e.m.assign(n, 0.0);
      e.v.assign(n, 0.0);
    }
    e.step += 1;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(e.step));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(e.step));
    auto g = grad.data();
    std::vector<double> next(e.value.data().begin(), e.value.data().end());
    for (std::size_t i = 0; i < n; ++i) {
      e.m[i] = beta1_ * e.m[i] + (1.0 - beta1_) * g[i];
      e.v[i] = beta2_ * e.v[i] + (1.0 - beta2_) * g[i] * g[i];
      double mhat = e.m[i] / bc1;
      double vhat = e.v[i] / bc2;
      next[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
    e.value = Tensor(e.value.shape(), std::move(next));
  }
}

void Adam::update(State& st, std::vector<double>& value, std::span<const double> grad) const {
  std::size_t n = value.size();
  if (st.m.empty()) {
    st.m.assign(n, 0.0);
    st.v.assign(n, 0.0);
  }
  st.step += 1;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(st.step));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(st.step));
  for (std::size_t i = 0; i < n; ++i) {
    st.m[i] = beta1_ * st.m[i] + (1.0 - beta1_) * grad[i];
    st.v[i] = beta2_ * st.v[i] + (1.0 - beta2_) * grad[i] * grad[i];
    value[i] -= lr_ * (st.m[i] / bc1) / (std::sqrt(st.v[i] / bc2) + eps_);
  }
}

}  // namespace dbpae
