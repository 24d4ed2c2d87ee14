#include "hyperagent/hypermodel.hpp"

#include <cmath>
#include <cstring>
#include <map>

#include "hyperagent/binary_io.hpp"
#include "hyperagent/errors.hpp"

namespace hyperagent {

Eigen::MatrixXd Hypermodel::effective_A(std::size_t head) const {
  return head_A[head] + prior_scale * prior_A[head];
}

Eigen::VectorXd Hypermodel::effective_b(std::size_t head) const {
  return head_b[head] + prior_scale * prior_b[head];
}

Hypermodel make_hypermodel(Eigen::Index input_dim, const std::vector<Eigen::Index>& hidden,
                           std::size_t n_heads, Eigen::Index M, double prior_scale, Rng& rng) {
  if (input_dim < 1 || M < 1 || n_heads < 1) throw ParameterError("hypermodel dimensions must be positive");
  Hypermodel model;
  model.prior_scale = prior_scale;
  model.extractor = make_mlp(input_dim, hidden, /*relu_output=*/true, rng);
  const Eigen::Index d_feat = model.feature_dim();
  for (std::size_t a = 0; a < n_heads; ++a) {
    model.head_A.push_back(Eigen::MatrixXd::Zero(d_feat, M));
    model.head_b.push_back(Eigen::VectorXd::Zero(d_feat));
    model.prior_A.push_back(
        sample_prior_perturbations<double>(d_feat, M, DistributionKind::sphere(), rng));
    model.prior_b.push_back(Eigen::VectorXd::Zero(d_feat));
  }
  return model;
}

namespace {

void check_index(const Hypermodel& model, const Eigen::VectorXd& zeta) {
  if (zeta.size() != model.index_dim()) throw InputError("index has wrong dimension");
}

}  // namespace

Eigen::VectorXd forward(const Hypermodel& model, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& zeta) {
  if (x.size() != model.input_dim()) throw InputError("model input has wrong dimension");
  check_index(model, zeta);
  const Eigen::VectorXd h = model.extractor.forward(x);
  Eigen::VectorXd out(static_cast<Eigen::Index>(model.head_count()));
  for (std::size_t a = 0; a < model.head_count(); ++a) {
    out[static_cast<Eigen::Index>(a)] = h.dot(model.effective_A(a) * zeta + model.effective_b(a));
  }
  return out;
}

Eigen::VectorXd forward_batch(const Hypermodel& model, const Eigen::MatrixXd& inputs,
                              const Eigen::VectorXd& zeta, std::size_t head) {
  if (inputs.rows() != model.input_dim()) throw InputError("model input has wrong dimension");
  if (head >= model.head_count()) throw InputError("head index out of range");
  check_index(model, zeta);
  const Eigen::VectorXd w = model.effective_A(head) * zeta + model.effective_b(head);
  return model.extractor.forward(inputs).transpose() * w;
}

// ---------------------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ < 1) throw ParameterError("replay buffer capacity must be >= 1");
}

void ReplayBuffer::add(Transition t) {
  if (entries_.size() == capacity_) entries_.pop_front();
  entries_.push_back(std::move(t));
}

std::vector<Transition> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  if (entries_.size() <= n) return {entries_.begin(), entries_.end()};
  std::uniform_int_distribution<std::size_t> pick(0, entries_.size() - 1);
  std::vector<Transition> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(entries_[pick(rng)]);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

double learnable_sq_norm(const Hypermodel& model) {
  double total = 0.0;
  for (std::size_t a = 0; a < model.head_count(); ++a) {
    total += model.head_A[a].squaredNorm() + model.head_b[a].squaredNorm();
  }
  return total;
}

void check_batch(const Hypermodel& model, const std::vector<Transition>& batch,
                 const Eigen::MatrixXd& xi, const Eigen::VectorXd& weights,
                 std::size_t total_buffer_size) {
  if (batch.empty()) throw InputError("loss needs a non-empty batch");
  if (xi.cols() < 1 || xi.cols() != weights.size()) throw InputError("index atoms and weights disagree");
  if (xi.rows() != model.index_dim()) throw InputError("index atoms have wrong dimension");
  if (total_buffer_size < 1) throw InputError("buffer size must be positive");
  for (const auto& t : batch) {
    if (t.head >= model.head_count()) throw InputError("transition head out of range");
    if (t.z.size() != model.index_dim()) throw InputError("stored perturbation has wrong dimension");
    if (t.input.size() != model.input_dim()) throw InputError("transition input has wrong dimension");
  }
}

/// Forward pass keeping pre-activations for backprop.
struct ExtractorTrace {
  std::vector<Eigen::VectorXd> activations;  // activations[0] = input
  std::vector<Eigen::VectorXd> pre;
};

ExtractorTrace trace_extractor(const Mlp& net, const Eigen::VectorXd& x) {
  ExtractorTrace tr;
  tr.activations.push_back(x);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    Eigen::VectorXd u = net.layers[l].weight * tr.activations.back() + net.layers[l].bias;
    const bool relu = l + 1 < net.layers.size() || net.relu_output;
    tr.activations.push_back(relu ? Eigen::VectorXd(u.cwiseMax(0.0)) : u);
    tr.pre.push_back(std::move(u));
  }
  return tr;
}

HypermodelGradient zero_gradient(const Hypermodel& model) {
  HypermodelGradient g;
  for (const auto& layer : model.extractor.layers) {
    g.extractor.push_back({Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                           Eigen::VectorXd::Zero(layer.bias.size())});
  }
  for (std::size_t a = 0; a < model.head_count(); ++a) {
    g.head_A.push_back(Eigen::MatrixXd::Zero(model.head_A[a].rows(), model.head_A[a].cols()));
    g.head_b.push_back(Eigen::VectorXd::Zero(model.head_b[a].size()));
  }
  return g;
}

}  // namespace

LossAndGradient loss_and_gradient(const Hypermodel& model, const std::vector<Transition>& batch,
                                  const Eigen::MatrixXd& xi, const Eigen::VectorXd& weights,
                                  double sigma, double lambda, std::size_t total_buffer_size) {
  check_batch(model, batch, xi, weights, total_buffer_size);
  LossAndGradient out;
  out.gradient = zero_gradient(model);
  auto& grad = out.gradient;
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  std::vector<Eigen::MatrixXd> eff_A;
  std::vector<Eigen::VectorXd> eff_b;
  for (std::size_t a = 0; a < model.head_count(); ++a) {
    eff_A.push_back(model.effective_A(a));
    eff_b.push_back(model.effective_b(a));
  }

  double data_loss = 0.0;
  for (const Transition& t : batch) {
    const ExtractorTrace tr = trace_extractor(model.extractor, t.input);
    const Eigen::VectorXd& h = tr.activations.back();
    Eigen::MatrixXd proj = eff_A[t.head] * xi;  // d_feat x K
    proj.colwise() += eff_b[t.head];
    const Eigen::VectorXd residual =
        (proj.transpose() * h).array() - t.y - sigma * (xi.transpose() * t.z).array();
    data_loss += weights.dot(residual.cwiseAbs2());

    const Eigen::VectorXd coeff = 2.0 * inv_batch * weights.cwiseProduct(residual);
    grad.head_A[t.head].noalias() += h * (xi * coeff).transpose();
    grad.head_b[t.head].noalias() += h * coeff.sum();

    Eigen::VectorXd upstream = proj * coeff;  // d loss / d h
    for (std::size_t l = model.extractor.layers.size(); l-- > 0;) {
      const bool relu = l + 1 < model.extractor.layers.size() || model.extractor.relu_output;
      Eigen::VectorXd du = upstream;
      if (relu) du = du.cwiseProduct((tr.pre[l].array() > 0.0).cast<double>().matrix());
      grad.extractor[l].weight.noalias() += du * tr.activations[l].transpose();
      grad.extractor[l].bias += du;
      if (l > 0) upstream = model.extractor.layers[l].weight.transpose() * du;
    }
  }

  const double ridge = lambda / static_cast<double>(total_buffer_size);
  out.loss = data_loss * inv_batch + ridge * learnable_sq_norm(model);
  for (std::size_t a = 0; a < model.head_count(); ++a) {
    grad.head_A[a] += 2.0 * ridge * model.head_A[a];
    grad.head_b[a] += 2.0 * ridge * model.head_b[a];
  }
  return out;
}

double weighted_loss(const Hypermodel& model, const std::vector<Transition>& batch,
                     const Eigen::MatrixXd& xi, const Eigen::VectorXd& weights, double sigma,
                     double lambda, std::size_t total_buffer_size) {
  check_batch(model, batch, xi, weights, total_buffer_size);
  double data_loss = 0.0;
  for (const Transition& t : batch) {
    const Eigen::VectorXd h = model.extractor.forward(t.input);
    Eigen::MatrixXd proj = model.effective_A(t.head) * xi;
    proj.colwise() += model.effective_b(t.head);
    const Eigen::VectorXd residual =
        (proj.transpose() * h).array() - t.y - sigma * (xi.transpose() * t.z).array();
    data_loss += weights.dot(residual.cwiseAbs2());
  }
  return data_loss / static_cast<double>(batch.size()) +
         lambda / static_cast<double>(total_buffer_size) * learnable_sq_norm(model);
}

double sampled_loss(const Hypermodel& model, const std::vector<Transition>& batch,
                    const Eigen::MatrixXd& xi_samples, double sigma, double lambda,
                    std::size_t total_buffer_size) {
  const Eigen::VectorXd weights =
      Eigen::VectorXd::Constant(xi_samples.cols(), 1.0 / static_cast<double>(xi_samples.cols()));
  return weighted_loss(model, batch, xi_samples, weights, sigma, lambda, total_buffer_size);
}

double exact_loss(const Hypermodel& model, const std::vector<Transition>& batch,
                  const DistributionKind& update_kind, double sigma, double lambda,
                  std::size_t total_buffer_size) {
  const auto support = finite_support<double>(update_kind, model.index_dim());
  if (!support) {
    throw UnsupportedError("update distribution " + to_string(update_kind) +
                           " has no enumerable support at M=" + std::to_string(model.index_dim()));
  }
  return weighted_loss(model, batch, support->atoms, support->weights, sigma, lambda,
                       total_buffer_size);
}

// ---------------------------------------------------------------------------

namespace {

template <typename Visit>
void visit_learnable(Hypermodel& model, Visit&& visit) {
  for (auto& layer : model.extractor.layers) {
    visit(layer.weight.data(), layer.weight.size());
    visit(layer.bias.data(), layer.bias.size());
  }
  for (std::size_t a = 0; a < model.head_count(); ++a) {
    visit(model.head_A[a].data(), model.head_A[a].size());
    visit(model.head_b[a].data(), model.head_b[a].size());
  }
}

std::size_t learnable_count(const Hypermodel& model) {
  std::size_t n = model.extractor.parameter_count();
  for (std::size_t a = 0; a < model.head_count(); ++a) n += model.head_A[a].size() + model.head_b[a].size();
  return n;
}

}  // namespace

Eigen::VectorXd flatten_learnable(const Hypermodel& model) {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(learnable_count(model)));
  Eigen::Index offset = 0;
  visit_learnable(const_cast<Hypermodel&>(model), [&](double* data, Eigen::Index n) {
    flat.segment(offset, n) = Eigen::Map<const Eigen::VectorXd>(data, n);
    offset += n;
  });
  return flat;
}

void assign_learnable(Hypermodel& model, const Eigen::VectorXd& flat) {
  if (flat.size() != static_cast<Eigen::Index>(learnable_count(model))) {
    throw InputError("flat parameter vector has wrong length");
  }
  Eigen::Index offset = 0;
  visit_learnable(model, [&](double* data, Eigen::Index n) {
    Eigen::Map<Eigen::VectorXd>(data, n) = flat.segment(offset, n);
    offset += n;
  });
}

Eigen::VectorXd flatten(const HypermodelGradient& g) {
  Eigen::Index n = 0;
  for (const auto& layer : g.extractor) n += layer.weight.size() + layer.bias.size();
  for (std::size_t a = 0; a < g.head_A.size(); ++a) n += g.head_A[a].size() + g.head_b[a].size();
  Eigen::VectorXd flat(n);
  Eigen::Index offset = 0;
  auto put = [&](const double* data, Eigen::Index size) {
    flat.segment(offset, size) = Eigen::Map<const Eigen::VectorXd>(data, size);
    offset += size;
  };
  for (const auto& layer : g.extractor) {
    put(layer.weight.data(), layer.weight.size());
    put(layer.bias.data(), layer.bias.size());
  }
  for (std::size_t a = 0; a < g.head_A.size(); ++a) {
    put(g.head_A[a].data(), g.head_A[a].size());
    put(g.head_b[a].data(), g.head_b[a].size());
  }
  return flat;
}

OptimizerState make_optimizer(const AgentConfig& cfg) {
  OptimizerState opt;
  opt.kind = cfg.optimizer;
  opt.learning_rate = cfg.learning_rate;
  return opt;
}

namespace {

void apply_step(Hypermodel& model, const Eigen::VectorXd& grad, OptimizerState& opt) {
  Eigen::VectorXd params = flatten_learnable(model);
  ++opt.steps;
  if (opt.kind == OptimizerKind::kSgd) {
    params -= opt.learning_rate * grad;
  } else {
    if (opt.first_moment.size() != grad.size()) {
      opt.first_moment = Eigen::VectorXd::Zero(grad.size());
      opt.second_moment = Eigen::VectorXd::Zero(grad.size());
    }
    opt.first_moment = opt.beta1 * opt.first_moment + (1.0 - opt.beta1) * grad;
    opt.second_moment = opt.beta2 * opt.second_moment + (1.0 - opt.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.steps));
    const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.steps));
    params.array() -= opt.learning_rate * (opt.first_moment.array() / c1) /
                      ((opt.second_moment.array() / c2).sqrt() + opt.epsilon);
  }
  assign_learnable(model, params);
}

}  // namespace

double sgd_step(Hypermodel& model, const ReplayBuffer& buffer, const AgentConfig& cfg,
                OptimizerState& optimizer, Rng& rng) {
  if (buffer.empty()) throw InputError("sgd_step needs a non-empty buffer");
  const std::optional<FiniteSupport<double>> support =
      cfg.exact_expectation ? finite_support<double>(cfg.update_kind, model.index_dim())
                            : std::nullopt;
  double last_loss = 0.0;
  for (std::size_t step = 0; step < cfg.update_steps; ++step) {
    const std::vector<Transition> batch = buffer.sample(cfg.batch_size, rng);
    Eigen::MatrixXd xi;
    Eigen::VectorXd weights;
    if (support) {
      xi = support->atoms;
      weights = support->weights;
    } else {
      xi.resize(model.index_dim(), static_cast<Eigen::Index>(cfg.xi_batch));
      for (Eigen::Index j = 0; j < xi.cols(); ++j) {
        xi.col(j) = sample_reference<double>(cfg.update_kind, model.index_dim(), rng);
      }
      weights = Eigen::VectorXd::Constant(xi.cols(), 1.0 / static_cast<double>(xi.cols()));
    }
    const LossAndGradient lg =
        loss_and_gradient(model, batch, xi, weights, cfg.sigma, cfg.lambda, buffer.size());
    if (!std::isfinite(lg.loss)) throw TrainingError("non-finite training loss", lg.loss, step);
    apply_step(model, flatten(lg.gradient), optimizer);
    last_loss = lg.loss;
  }
  return last_loss;
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[4] = {'H', 'A', 'M', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;

struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<float> data;  // row-major
};

Tensor to_tensor(const Eigen::MatrixXd& m) {
  Tensor t{{static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())}, {}};
  t.data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) t.data.push_back(static_cast<float>(m(r, c)));
  return t;
}

Tensor to_tensor(const Eigen::VectorXd& v) {
  Tensor t{{static_cast<std::uint64_t>(v.size())}, {}};
  for (Eigen::Index i = 0; i < v.size(); ++i) t.data.push_back(static_cast<float>(v[i]));
  return t;
}

Tensor scalar_tensor(double value) { return Tensor{{}, {static_cast<float>(value)}}; }

Eigen::MatrixXd matrix_from(const Tensor& t, const std::string& name) {
  if (t.dims.size() != 2) throw FormatError("tensor " + name + " must have rank 2", 0);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.dims[0]), static_cast<Eigen::Index>(t.dims[1]));
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = t.data[k++];
  return m;
}

Eigen::VectorXd vector_from(const Tensor& t, const std::string& name) {
  if (t.dims.size() != 1) throw FormatError("tensor " + name + " must have rank 1", 0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(t.dims[0]));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = t.data[static_cast<std::size_t>(i)];
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Hypermodel& model) {
  std::vector<std::pair<std::string, Tensor>> tensors;
  tensors.emplace_back("input_dim", scalar_tensor(static_cast<double>(model.input_dim())));
  tensors.emplace_back("prior_scale", scalar_tensor(model.prior_scale));
  for (std::size_t l = 0; l < model.extractor.layers.size(); ++l) {
    const std::string prefix = "extractor." + std::to_string(l);
    tensors.emplace_back(prefix + ".weight", to_tensor(model.extractor.layers[l].weight));
    tensors.emplace_back(prefix + ".bias", to_tensor(model.extractor.layers[l].bias));
  }
  for (std::size_t a = 0; a < model.head_count(); ++a) {
    const std::string idx = std::to_string(a);
    tensors.emplace_back("head." + idx + ".A", to_tensor(model.head_A[a]));
    tensors.emplace_back("head." + idx + ".b", to_tensor(model.head_b[a]));
    tensors.emplace_back("prior." + idx + ".A", to_tensor(model.prior_A[a]));
    tensors.emplace_back("prior." + idx + ".b", to_tensor(model.prior_b[a]));
  }
  out.write(kCheckpointMagic, 4);
  binary::write_le<std::uint32_t>(out, kCheckpointVersion);
  binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.dims.size()));
    for (const auto dim : t.dims) binary::write_le<std::uint64_t>(out, dim);
    for (const float v : t.data) binary::write_le<float>(out, v);
  }
}

Hypermodel read_checkpoint(std::istream& in) {
  binary::Reader reader(in);
  char magic[4];
  reader.read_bytes(magic, 4, "magic");
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) throw FormatError("bad checkpoint magic", 0);
  const auto version = reader.read<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);
  }
  const auto count = reader.read<std::uint32_t>("tensor count");
  std::map<std::string, Tensor> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = reader.read<std::uint32_t>("name length");
    if (name_len > 4096) throw FormatError("tensor name too long", reader.offset());
    std::string name(name_len, '\0');
    reader.read_bytes(name.data(), name_len, "tensor name");
    const auto rank = reader.read<std::uint32_t>("rank");
    if (rank > 2) throw FormatError("tensor rank above 2", reader.offset());
    Tensor t;
    std::uint64_t elems = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.dims.push_back(reader.read<std::uint64_t>("dimension"));
      elems *= t.dims.back();
    }
    if (elems > (std::uint64_t{1} << 32)) throw FormatError("tensor too large", reader.offset());
    t.data.resize(elems);
    for (auto& v : t.data) v = reader.read<float>("tensor data");
    tensors.emplace(std::move(name), std::move(t));
  }

  auto require = [&](const std::string& name) -> const Tensor& {
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError("checkpoint lacks tensor " + name, reader.offset());
    return it->second;
  };

  Hypermodel model;
  model.extractor.relu_output = true;
  model.extractor.input_dim = static_cast<Eigen::Index>(require("input_dim").data.at(0));
  model.prior_scale = require("prior_scale").data.at(0);
  for (std::size_t l = 0; tensors.count("extractor." + std::to_string(l) + ".weight"); ++l) {
    const std::string prefix = "extractor." + std::to_string(l);
    model.extractor.layers.push_back({matrix_from(require(prefix + ".weight"), prefix + ".weight"),
                                      vector_from(require(prefix + ".bias"), prefix + ".bias")});
  }
  for (std::size_t a = 0; tensors.count("head." + std::to_string(a) + ".A"); ++a) {
    const std::string idx = std::to_string(a);
    model.head_A.push_back(matrix_from(require("head." + idx + ".A"), "head.A"));
    model.head_b.push_back(vector_from(require("head." + idx + ".b"), "head.b"));
    model.prior_A.push_back(matrix_from(require("prior." + idx + ".A"), "prior.A"));
    model.prior_b.push_back(vector_from(require("prior." + idx + ".b"), "prior.b"));
  }
  if (model.head_A.empty()) throw FormatError("checkpoint has no heads", reader.offset());
  return model;
}

// ---------------------------------------------------------------------------

SgdHyperAgent::SgdHyperAgent(AgentConfig cfg, Eigen::Index input_dim, std::size_t n_heads,
                             Rng& rng, std::string label)
    : cfg_(std::move(cfg)),
      buffer_(cfg_.buffer_capacity),
      optimizer_(make_optimizer(cfg_)),
      label_(std::move(label)) {
  cfg_.validate();
  if (label_.empty()) label_ = hyperagent_label(cfg_) + ":sgd";
  model_ = make_hypermodel(input_dim, cfg_.hidden, n_heads, cfg_.M, cfg_.prior_scale, rng);
}

bool SgdHyperAgent::uses_context(const ActionSet& set) const {
  return set.context.has_value() && model_.head_count() == static_cast<std::size_t>(set.size()) &&
         set.context->size() == model_.input_dim();
}

Action SgdHyperAgent::act(const ActionSet& set, Rng& rng) {
  if (set.compact_sphere) throw UnsupportedError("the SGD HyperAgent needs a finite action set");
  if (set.size() == 0) throw InputError("empty action set");
  const Eigen::VectorXd zeta = sample_reference<double>(cfg_.reference_kind, cfg_.M, rng);
  const Eigen::VectorXd values = uses_context(set)
                                     ? forward(model_, *set.context, zeta)
                                     : forward_batch(model_, set.features.transpose(), zeta, 0);
  Action a;
  a.index = argmax_first(values);
  a.feature = set.features.row(a.index).transpose();
  return a;
}

void SgdHyperAgent::observe(const ActionSet& set, const Action& action, double reward, Rng& rng) {
  Transition t;
  if (uses_context(set)) {
    t.input = *set.context;
    t.head = static_cast<std::size_t>(action.index);
  } else {
    t.input = action.feature;
    t.head = 0;
  }
  t.y = reward;
  t.z = sample_perturbation<double>(cfg_.perturbation_kind, cfg_.M, rng).z;
  buffer_.add(std::move(t));
  sgd_step(model_, buffer_, cfg_, optimizer_, rng);
}

}  // namespace hyperagent
