#include "meshattn/scanpath_rl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "meshattn/io.hpp"

namespace meshattn {

std::string_view to_string(StartMode mode) {
  return mode == StartMode::Argmax ? "argmax" : "sample";
}

StartMode parse_start_mode(std::string_view name) {
  if (name == "sample") return StartMode::Sample;
  if (name == "argmax") return StartMode::Argmax;
  throw InvalidArgument("unknown start mode '" + std::string(name) + "'");
}

RewardTerms reward_terms(double saliency, Index visits, bool new_region, double diversity,
                         const RewardConfig& c) {
  RewardTerms r;
  r.saliency = c.saliency * saliency;
  r.ior = -c.ior * std::tanh(double(visits) / c.ior_scale);
  r.new_region = new_region ? c.new_region : 0.0;
  r.diversity = c.diversity * diversity;
  r.step = -c.step_penalty;
  return r;
}

// ---------------------------------------------------------------------------
// Environment

ScanpathEnv::ScanpathEnv(const Mesh& mesh, SaliencyMap saliency, RewardConfig config)
    : mesh_(&mesh), saliency_(std::move(saliency)), config_(config) {
  const Index n = mesh.num_vertices();
  if (saliency_.size() != n)
    throw LengthMismatch("saliency has " + std::to_string(saliency_.size()) +
                         " values for " + std::to_string(n) + " vertices");
  if (n <= kActions) throw InvalidArgument("scanpath mesh needs more than 6 vertices");
  if (!saliency_.values.allFinite()) throw InvalidArgument("saliency must be finite");
  if (config_.region_grid < 1 || config_.diversity_window < 1 || !(config_.diversity_scale > 0.0))
    throw InvalidArgument("region grid, diversity window and scale must be positive");

  neighbors_.resize(std::size_t(n));
  cell_.resize(std::size_t(n));
  centre_dist_.resize(n);
  const Index g = config_.region_grid;
  const Vec3 lo = mesh.bbox_min(), extent = mesh.bbox_max() - mesh.bbox_min();
  const double diag = mesh.bbox_diagonal();
  for (Index v = 0; v < n; ++v) {
    const auto nb = surface_neighbors(mesh, v, kActions);
    std::copy(nb.begin(), nb.end(), neighbors_[std::size_t(v)].begin());
    Index id = 0;
    for (int a = 0; a < 3; ++a) {
      Index c = 0;
      if (extent[a] > 0.0)
        c = std::clamp<Index>(Index(std::floor((mesh.vertex(v)[a] - lo[a]) / extent[a] * g)), 0,
                              g - 1);
      id = id * g + c;
    }
    cell_[std::size_t(v)] = id;
    centre_dist_[v] = (mesh.vertex(v) - mesh.centroid()).norm() / diag;
  }
}

Observation ScanpathEnv::reset(StartMode mode, Rng& rng) {
  const VectorXd& s = saliency_.values;
  if (mode == StartMode::Argmax) {
    Index best = 0;
    for (Index v = 1; v < s.size(); ++v)
      if (s[v] > s[best]) best = v;
    return reset_at(best);
  }
  const double total = s.cwiseMax(0.0).sum();
  if (!(total > 0.0)) return reset_at(Index(rng.uniform_index(std::uint64_t(s.size()))));
  const double u = rng.uniform() * total;
  double acc = 0.0;
  Index last = 0;
  for (Index v = 0; v < s.size(); ++v) {
    if (s[v] <= 0.0) continue;
    acc += s[v];
    last = v;
    if (u < acc) return reset_at(v);
  }
  return reset_at(last);
}

Observation ScanpathEnv::reset_at(Index vertex) {
  if (vertex < 0 || vertex >= mesh_->num_vertices())
    throw InvalidArgument("start vertex out of range");
  const Index g = config_.region_grid;
  state_.current = vertex;
  state_.visits.assign(std::size_t(mesh_->num_vertices()), 0);
  state_.visits[std::size_t(vertex)] = 1;
  state_.history.assign(1, vertex);
  state_.step = 0;
  state_.regions.assign(std::size_t(g * g * g), 0);
  state_.regions[std::size_t(region_of(vertex))] = 1;
  return observe();
}

bool ScanpathEnv::is_new_region(Index next) const {
  return !state_.regions[std::size_t(region_of(next))];
}

double ScanpathEnv::diversity(Index next) const {
  if (state_.history.empty()) return 1.0;
  const std::size_t window = std::size_t(config_.diversity_window);
  const std::size_t first = state_.history.size() > window ? state_.history.size() - window : 0;
  double nearest = std::numeric_limits<double>::infinity();
  for (std::size_t i = first; i < state_.history.size(); ++i)
    nearest = std::min(nearest, (mesh_->vertex(next) - mesh_->vertex(state_.history[i])).norm());
  return std::clamp(nearest / (config_.diversity_scale * mesh_->bbox_diagonal()), 0.0, 1.0);
}

RewardTerms ScanpathEnv::reward_terms(Index next) const {
  return meshattn::reward_terms(saliency_.values[next], state_.visits[std::size_t(next)],
                                is_new_region(next), diversity(next), config_);
}

StepResult ScanpathEnv::step(Index action) {
  if (done()) throw InvalidArgument("episode already finished");
  if (action < 0 || action >= kActions) throw InvalidArgument("action out of range");
  const Index next = candidates(state_.current)[std::size_t(action)];
  StepResult out;
  out.reward = reward(next);
  state_.current = next;
  ++state_.visits[std::size_t(next)];
  state_.history.push_back(next);
  state_.regions[std::size_t(region_of(next))] = 1;
  ++state_.step;
  out.done = done();
  out.observation = observe();
  return out;
}

Observation ScanpathEnv::observe() const {
  const Index v = state_.current;
  const double diag = mesh_->bbox_diagonal();
  Observation o;
  o[0] = saliency_.values[v];
  o[1] = std::tanh(double(state_.visits[std::size_t(v)]) / config_.ior_scale);
  const auto& nb = candidates(v);
  for (Index a = 0; a < kActions; ++a) {
    o[2 + a] = saliency_.values[nb[std::size_t(a)]];
    o[2 + kActions + a] = (mesh_->vertex(nb[std::size_t(a)]) - mesh_->vertex(v)).norm() / diag;
  }
  o[14] = double(state_.step) / double(kEpisodeLength);
  o[15] = centre_dist_[v];
  return o;
}

// ---------------------------------------------------------------------------
// Advantage estimation

GaeResult gae(const VectorXd& rewards, const VectorXd& values, double gamma, double lambda) {
  return gae(rewards, values, std::vector<char>(std::size_t(rewards.size()), 0), gamma, lambda);
}

GaeResult gae(const VectorXd& rewards, const VectorXd& values, const std::vector<char>& terminal,
              double gamma, double lambda) {
  const Index n = rewards.size();
  if (values.size() != n + 1)
    throw LengthMismatch("values need one bootstrap entry more than rewards");
  if (Index(terminal.size()) != n) throw LengthMismatch("terminal flags differ from rewards");
  GaeResult out{VectorXd(n), VectorXd(n)};
  double running = 0.0;
  for (Index t = n - 1; t >= 0; --t) {
    const double keep = terminal[std::size_t(t)] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * keep * values[t + 1] - values[t];
    running = delta + gamma * lambda * keep * running;
    out.advantages[t] = running;
  }
  out.returns = out.advantages + values.head(n);
  return out;
}

// ---------------------------------------------------------------------------
// Networks

template <typename Scalar>
Mlp<Scalar> Mlp<Scalar>::init(Index in, Index hidden, Index out, double out_gain, Rng& rng) {
  Mlp m;
  m.w1 = nn::uniform_init<Scalar>(in, hidden, in, rng);
  m.b1 = Mat::Zero(1, hidden);
  m.w2 = nn::uniform_init<Scalar>(hidden, hidden, hidden, rng);
  m.b2 = Mat::Zero(1, hidden);
  m.w3 = nn::uniform_init<Scalar>(hidden, out, hidden, rng) * Scalar(out_gain);
  m.b3 = Mat::Zero(1, out);
  return m;
}

template <typename Scalar>
Mlp<Scalar> Mlp<Scalar>::zeros_like(const Mlp& other) {
  Mlp m;
  for (const auto& [name, member] : tensors())
    m.*member = Mat::Zero((other.*member).rows(), (other.*member).cols());
  return m;
}

template <typename Scalar>
typename Mlp<Scalar>::Mat Mlp<Scalar>::forward(const Mat& x, Cache* cache) const {
  Mat h1 = ((x * w1).rowwise() + b1.row(0)).array().tanh().matrix();
  Mat h2 = ((h1 * w2).rowwise() + b2.row(0)).array().tanh().matrix();
  Mat y = (h2 * w3).rowwise() + b3.row(0);
  if (cache) {
    cache->x = x;
    cache->h1 = std::move(h1);
    cache->h2 = std::move(h2);
  }
  return y;
}

template <typename Scalar>
Mlp<Scalar> Mlp<Scalar>::backward(const Cache& c, const Mat& dout) const {
  Mlp g;
  g.w3 = c.h2.transpose() * dout;
  g.b3 = dout.colwise().sum();
  const Mat dz2 = ((dout * w3.transpose()).array() * (Scalar(1) - c.h2.array().square())).matrix();
  g.w2 = c.h1.transpose() * dz2;
  g.b2 = dz2.colwise().sum();
  const Mat dz1 = ((dz2 * w2.transpose()).array() * (Scalar(1) - c.h1.array().square())).matrix();
  g.w1 = c.x.transpose() * dz1;
  g.b1 = dz1.colwise().sum();
  return g;
}

template <typename Scalar>
std::vector<typename Mlp<Scalar>::Mat*> Mlp<Scalar>::parameters() {
  std::vector<Mat*> out;
  for (const auto& [name, member] : tensors()) out.push_back(&(this->*member));
  return out;
}

template <typename Scalar>
std::vector<const typename Mlp<Scalar>::Mat*> Mlp<Scalar>::parameters() const {
  std::vector<const Mat*> out;
  for (const auto& [name, member] : tensors()) out.push_back(&(this->*member));
  return out;
}

template <typename Scalar>
bool Mlp<Scalar>::all_finite() const {
  for (const auto& [name, member] : tensors())
    if (!(this->*member).allFinite()) return false;
  return true;
}

template struct Mlp<float>;
template struct Mlp<double>;

PolicyParams PolicyParams::init(Index hidden, std::uint64_t seed) {
  if (hidden < 1) throw InvalidArgument("hidden width must be positive");
  Rng rng(seed);
  PolicyParams p;
  // Small output layer: the initial policy is close to uniform.
  p.policy = Mlp<double>::init(kObservationSize, hidden, kActions, 0.01, rng);
  p.value = Mlp<double>::init(kObservationSize, hidden, 1, 1.0, rng);
  return p;
}

namespace {

using ActionProbs = Eigen::Matrix<double, kActions, 1>;

RowMatrix<double> as_row(const Observation& obs) { return obs.transpose(); }

ActionProbs softmax(const Eigen::Ref<const Eigen::RowVectorXd>& logits) {
  const Eigen::RowVectorXd e = (logits.array() - logits.maxCoeff()).exp();
  return (e / e.sum()).transpose();
}

Index sample_action(const ActionProbs& p, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (Index a = 0; a < kActions; ++a) {
    acc += p[a];
    if (u < acc) return a;
  }
  return kActions - 1;
}

Index argmax_action(const ActionProbs& p) {
  Index best = 0;
  for (Index a = 1; a < kActions; ++a)
    if (p[a] > p[best]) best = a;
  return best;
}

double entropy_of(const ActionProbs& p) {
  double h = 0.0;
  for (Index a = 0; a < kActions; ++a)
    if (p[a] > 0.0) h -= p[a] * std::log(p[a]);
  return h;
}

}  // namespace

ActionProbs PolicyParams::distribution(const Observation& obs) const {
  return softmax(policy.forward(as_row(obs)).row(0));
}

double PolicyParams::state_value(const Observation& obs) const {
  return value.forward(as_row(obs))(0, 0);
}

// ---------------------------------------------------------------------------
// Clipped policy optimisation

void PpoConfig::validate() const {
  if (!(clip > 0.0)) throw InvalidArgument("clip must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0) || !(gae_lambda > 0.0 && gae_lambda <= 1.0))
    throw InvalidArgument("gamma and lambda must lie in (0, 1]");
  if (total_timesteps < 1 || rollout < 1 || epochs < 1 || minibatch < 1 || hidden < 1)
    throw InvalidArgument("timesteps, rollout, epochs, minibatch and hidden must be >= 1");
  if (!(lr >= 0.0) || !(entropy_coef >= 0.0) || !(value_coef >= 0.0))
    throw InvalidArgument("learning rate and loss coefficients must be nonnegative");
}

PpoLoss ppo_loss(const PolicyParams& params, const Rollout& batch, const PpoConfig& cfg,
                 PolicyParams* grad) {
  const Index b = batch.observations.rows();
  if (b == 0) throw InvalidArgument("empty minibatch");
  if (Index(batch.actions.size()) != b || batch.log_probs.size() != b ||
      batch.advantages.size() != b || batch.returns.size() != b)
    throw LengthMismatch("rollout fields differ in length");

  Mlp<double>::Cache pc, vc;
  const RowMatrix<double> logits = params.policy.forward(batch.observations, &pc);
  const RowMatrix<double> values = params.value.forward(batch.observations, &vc);
  RowMatrix<double> dlogits = RowMatrix<double>::Zero(b, kActions);
  RowMatrix<double> dvalues(b, 1);

  PpoLoss out;
  Index clipped = 0;
  for (Index i = 0; i < b; ++i) {
    const ActionProbs p = softmax(logits.row(i));
    const ActionProbs logp = p.array().max(1e-300).log();
    const Index a = batch.actions[std::size_t(i)];
    const double adv = batch.advantages[i];
    const double ratio = std::exp(logp[a] - batch.log_probs[i]);
    const double unclipped = ratio * adv;
    const double bounded = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * adv;
    out.policy -= std::min(unclipped, bounded);
    if (std::abs(ratio - 1.0) > cfg.clip) ++clipped;
    const double h = entropy_of(p);
    out.entropy += h;

    // d logp_a / d logits = onehot(a) - p; d H / d logits_j = -p_j (log p_j + H)
    const double dlogp = unclipped <= bounded ? -ratio * adv : 0.0;
    for (Index j = 0; j < kActions; ++j)
      dlogits(i, j) = dlogp * ((j == a ? 1.0 : 0.0) - p[j]) +
                      cfg.entropy_coef * p[j] * (logp[j] + h);
    const double err = values(i, 0) - batch.returns[i];
    out.value += err * err;
    dvalues(i, 0) = 2.0 * cfg.value_coef * err;
  }
  const double inv = 1.0 / double(b);
  out.policy *= inv;
  out.value *= inv;
  out.entropy *= inv;
  out.clip_fraction = double(clipped) * inv;
  out.total = out.policy + cfg.value_coef * out.value - cfg.entropy_coef * out.entropy;
  if (grad) {
    grad->policy = params.policy.backward(pc, dlogits * inv);
    grad->value = params.value.backward(vc, dvalues * inv);
  }
  return out;
}

namespace {

Rollout select_rows(const Rollout& r, const std::vector<Index>& rows) {
  Rollout out;
  const Index n = Index(rows.size());
  out.observations.resize(n, kObservationSize);
  out.actions.resize(rows.size());
  out.log_probs.resize(n);
  out.advantages.resize(n);
  out.returns.resize(n);
  for (Index i = 0; i < n; ++i) {
    const Index s = rows[std::size_t(i)];
    out.observations.row(i) = r.observations.row(s);
    out.actions[std::size_t(i)] = r.actions[std::size_t(s)];
    out.log_probs[i] = r.log_probs[s];
    out.advantages[i] = r.advantages[s];
    out.returns[i] = r.returns[s];
  }
  return out;
}

std::vector<nn::Mat<double>*> all_parameters(PolicyParams& p) {
  auto out = p.policy.parameters();
  for (auto* t : p.value.parameters()) out.push_back(t);
  return out;
}

std::vector<const nn::Mat<double>*> all_parameters(const PolicyParams& p) {
  auto out = p.policy.parameters();
  for (const auto* t : p.value.parameters()) out.push_back(t);
  return out;
}

}  // namespace

ScanpathTrainResult train_scanpath(const Mesh& mesh, const SaliencyMap& saliency,
                                   const PpoConfig& cfg, const RewardConfig& reward,
                                   const std::function<void(const RolloutStats&)>& on_rollout) {
  cfg.validate();
  ScanpathEnv env(mesh, saliency, reward);
  PolicyParams params = PolicyParams::init(cfg.hidden, Rng::mix(cfg.seed, 0x5CA9));
  nn::AdamW<double> opt({.lr = cfg.lr});
  Rng rng(Rng::mix(cfg.seed, 0xE9150DE));

  ScanpathTrainResult result{params, {}, -std::numeric_limits<double>::infinity()};
  Observation obs = env.reset(cfg.start, rng);
  double episode_return = 0.0;
  Index timestep = 0;
  for (Index update = 0; timestep < cfg.total_timesteps; ++update) {
    const Index n = cfg.rollout;
    Rollout buf;
    buf.observations.resize(n, kObservationSize);
    buf.actions.resize(std::size_t(n));
    buf.log_probs.resize(n);
    VectorXd rewards(n), values(n + 1);
    std::vector<char> terminal(std::size_t(n), 0);
    std::vector<double> finished;
    double entropy = 0.0;

    for (Index t = 0; t < n; ++t) {
      const ActionProbs p = params.distribution(obs);
      const Index a = sample_action(p, rng);
      buf.observations.row(t) = obs.transpose();
      buf.actions[std::size_t(t)] = a;
      buf.log_probs[t] = std::log(std::max(p[a], 1e-300));
      values[t] = params.state_value(obs);
      entropy += entropy_of(p);
      const StepResult step = env.step(a);
      rewards[t] = step.reward;
      episode_return += step.reward;
      if (step.done) {
        terminal[std::size_t(t)] = 1;
        finished.push_back(episode_return);
        episode_return = 0.0;
        obs = env.reset(cfg.start, rng);
      } else {
        obs = step.observation;
      }
    }
    values[n] = params.state_value(obs);
    timestep += n;

    RolloutStats stats;
    stats.timestep = timestep;
    stats.entropy = entropy / double(n);
    stats.episodes = Index(finished.size());
    stats.mean_return = finished.empty()
                            ? std::numeric_limits<double>::quiet_NaN()
                            : std::accumulate(finished.begin(), finished.end(), 0.0) /
                                  double(finished.size());
    result.curve.push_back(stats);
    if (on_rollout) on_rollout(stats);
    if (!finished.empty() && stats.mean_return > result.best_return) {
      result.best_return = stats.mean_return;
      result.params = params;
    }

    GaeResult est = gae(rewards, values, terminal, cfg.gamma, cfg.gae_lambda);
    const double mean = est.advantages.mean();
    const double sd = std::sqrt((est.advantages.array() - mean).square().mean());
    buf.advantages = (est.advantages.array() - mean) / (sd + 1e-8);
    buf.returns = std::move(est.returns);

    std::vector<Index> order(static_cast<std::size_t>(n));
    for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::iota(order.begin(), order.end(), Index{0});
      Rng shuffle(Rng::mix(cfg.seed, 0xB47C0000ULL + std::uint64_t(update * cfg.epochs + epoch)));
      for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[shuffle.uniform_index(i)]);
      for (Index start = 0; start < n; start += cfg.minibatch) {
        const std::vector<Index> rows(order.begin() + start,
                                      order.begin() + std::min(n, start + cfg.minibatch));
        PolicyParams grad;
        const PpoLoss loss = ppo_loss(params, select_rows(buf, rows), cfg, &grad);
        if (!std::isfinite(loss.total) || !grad.policy.all_finite() || !grad.value.all_finite())
          throw NonFinite("non-finite policy loss at update " + std::to_string(update));
        opt.step(all_parameters(params), all_parameters(std::as_const(grad)));
      }
    }
    if (!params.policy.all_finite() || !params.value.all_finite())
      throw NonFinite("non-finite policy weights at update " + std::to_string(update));
  }
  if (!std::isfinite(result.best_return)) result.best_return = 0.0;
  return result;
}

// ---------------------------------------------------------------------------
// Rollouts with a fixed policy

Scanpath generate_scanpath(const Mesh& mesh, const SaliencyMap& saliency,
                           const PolicyParams& params, bool deterministic, std::uint64_t seed,
                           StartMode start, const RewardConfig& reward) {
  ScanpathEnv env(mesh, saliency, reward);
  Rng rng(seed);
  env.reset(start, rng);
  const EpisodeReport ep = run_episode(env, env.state().current, Walker::Policy, rng, &params,
                                       deterministic);
  Scanpath path;
  for (Index v : ep.path) path.fixations.push_back({v, mesh.vertex(v), 1.0});
  return path;
}

EpisodeReport run_episode(ScanpathEnv& env, Index start, Walker walker, Rng& rng,
                          const PolicyParams* params, bool deterministic) {
  if (walker == Walker::Policy && !params) throw InvalidArgument("policy walker needs params");
  Observation obs = env.reset_at(start);
  EpisodeReport ep;
  ep.path.push_back(start);
  while (!env.done()) {
    const auto& cand = env.candidates(env.state().current);
    Index action = 0;
    switch (walker) {
      case Walker::Policy: {
        const ActionProbs p = params->distribution(obs);
        action = deterministic ? argmax_action(p) : sample_action(p, rng);
        break;
      }
      case Walker::Greedy: {
        double best = -std::numeric_limits<double>::infinity();
        for (Index a = 0; a < kActions; ++a) {
          const double r = env.reward(cand[std::size_t(a)]);
          if (r > best) {
            best = r;
            action = a;
          }
        }
        break;
      }
      case Walker::Random:
        action = Index(rng.uniform_index(kActions));
        break;
    }
    const Index next = cand[std::size_t(action)];
    if (env.state().visits[std::size_t(next)] > 0) ++ep.revisits;
    const StepResult step = env.step(action);
    ep.total_reward += step.reward;
    ep.path.push_back(next);
    obs = step.observation;
  }
  return ep;
}

// ---------------------------------------------------------------------------
// Files

void save_scanpath_curve(const std::vector<RolloutStats>& curve,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "timestep,mean_return,entropy,episodes\n";
  for (const auto& s : curve)
    out << s.timestep << ',' << format_double(s.mean_return) << ',' << format_double(s.entropy)
        << ',' << s.episodes << '\n';
}

std::string ppo_to_config(const PpoConfig& c) {
  std::ostringstream s;
  s << "ppo.clip=" << format_double(c.clip) << '\n'
    << "ppo.gae_lambda=" << format_double(c.gae_lambda) << '\n'
    << "ppo.gamma=" << format_double(c.gamma) << '\n'
    << "ppo.total_timesteps=" << c.total_timesteps << '\n'
    << "ppo.rollout=" << c.rollout << '\n'
    << "ppo.epochs=" << c.epochs << '\n'
    << "ppo.minibatch=" << c.minibatch << '\n'
    << "ppo.lr=" << format_double(c.lr) << '\n'
    << "ppo.entropy_coef=" << format_double(c.entropy_coef) << '\n'
    << "ppo.value_coef=" << format_double(c.value_coef) << '\n'
    << "ppo.hidden=" << c.hidden << '\n'
    << "ppo.start=" << to_string(c.start) << '\n'
    << "seed=" << c.seed << '\n';
  return s.str();
}

std::string reward_to_config(const RewardConfig& c) {
  std::ostringstream s;
  s << "reward.saliency=" << format_double(c.saliency) << '\n'
    << "reward.ior=" << format_double(c.ior) << '\n'
    << "reward.ior_scale=" << format_double(c.ior_scale) << '\n'
    << "reward.new_region=" << format_double(c.new_region) << '\n'
    << "reward.diversity=" << format_double(c.diversity) << '\n'
    << "reward.step_penalty=" << format_double(c.step_penalty) << '\n'
    << "reward.region_grid=" << c.region_grid << '\n'
    << "reward.diversity_window=" << c.diversity_window << '\n'
    << "reward.diversity_scale=" << format_double(c.diversity_scale) << '\n';
  return s.str();
}

void save_policy_checkpoint(const PolicyParams& params, const PpoConfig& config,
                            const RewardConfig& reward, const std::filesystem::path& path) {
  nn::TensorTable table;
  for (const auto& [name, member] : Mlp<double>::tensors()) {
    table.tensors.push_back(nn::NamedTensor::from(std::string("policy.") + name,
                                                  params.policy.*member));
  }
  for (const auto& [name, member] : Mlp<double>::tensors()) {
    table.tensors.push_back(nn::NamedTensor::from(std::string("value.") + name,
                                                  params.value.*member));
  }
  table.config = ppo_to_config(config) + reward_to_config(reward);
  nn::save_tensor_table(table, "SGPI", path);
}

PolicyParams load_policy_checkpoint(const std::filesystem::path& path) {
  const nn::TensorTable table = nn::load_tensor_table("SGPI", path);
  PolicyParams p;
  auto fill = [&](const std::string& prefix, Mlp<double>& net, Index outputs) {
    for (const auto& [name, member] : Mlp<double>::tensors())
      net.*member = table.at(prefix + name).as<double>();
    const Index hidden = net.w1.cols();
    const bool shapes_ok =
        net.w1.rows() == kObservationSize && net.b1.rows() == 1 && net.b1.cols() == hidden &&
        net.w2.rows() == hidden && net.w2.cols() == hidden && net.b2.rows() == 1 &&
        net.b2.cols() == hidden && net.w3.rows() == hidden && net.w3.cols() == outputs &&
        net.b3.rows() == 1 && net.b3.cols() == outputs;
    if (!shapes_ok) throw ParseError("policy checkpoint '" + prefix + "' has the wrong shape");
    if (!net.all_finite()) throw ParseError("policy checkpoint holds non-finite weights");
  };
  fill("policy.", p.policy, kActions);
  fill("value.", p.value, 1);
  return p;
}

}  // namespace meshattn
