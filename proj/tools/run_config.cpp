#include "run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "meshattn/io.hpp"

namespace meshattn::cli {

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty())
    throw InvalidArgument("config key '" + key + "': cannot parse '" + text + "'");
  return value;
}

template <typename T>
std::string show(const T& value) {
  if constexpr (std::is_floating_point_v<T>)
    return format_double(double(value));
  else
    return std::to_string(value);
}

// `access` is a generic lambda returning a reference into the config.
template <typename Access>
ConfigKey number(std::string key, std::string note, Access access) {
  return {key, std::move(note),
          [access](const RunConfig& c) { return show(access(const_cast<RunConfig&>(c))); },
          [access, key](RunConfig& c, const std::string& text) {
            auto& field = access(c);
            field = parse_number<std::remove_reference_t<decltype(field)>>(key, text);
          }};
}

template <typename Access, typename Show, typename Parse>
ConfigKey named(std::string key, std::string note, Access access, Show shown, Parse parse) {
  return {std::move(key), std::move(note),
          [access, shown](const RunConfig& c) {
            return std::string(shown(access(const_cast<RunConfig&>(c))));
          },
          [access, parse](RunConfig& c, const std::string& text) { access(c) = parse(text); }};
}

std::string_view selection_name(TimestepSelection s) {
  return s == TimestepSelection::MostNoisy ? "most_noisy" : "least_noisy";
}

TimestepSelection parse_selection(std::string_view text) {
  if (text == "least_noisy") return TimestepSelection::LeastNoisy;
  if (text == "most_noisy") return TimestepSelection::MostNoisy;
  throw InvalidArgument("unknown timestep selection '" + std::string(text) + "'");
}

std::vector<ConfigKey> build_keys() {
  const auto mode_name = [](FusionMode m) { return to_string(m); };
  const auto schedule_name = [](LrSchedule s) { return to_string(s); };
  const auto start_name = [](StartMode s) { return to_string(s); };
  return {
      number("seed", "run seed, copied into every seeded stage",
             [](RunConfig& c) -> auto& { return c.seed; }),

      named("fusion.mode", "cross_attention (the proposed fusion)",
            [](RunConfig& c) -> auto& { return c.arch.mode; }, mode_name, parse_fusion_mode),
      number("fusion.sem_in", "2048 = 1280 diffusion + 768 DINO channels",
             [](RunConfig& c) -> auto& { return c.arch.sem_in; }),
      number("fusion.sem_hidden", "semantic MLP 2048 -> 512 -> 32",
             [](RunConfig& c) -> auto& { return c.arch.sem_hidden; }),
      number("fusion.hidden", "hidden width d_h = 32",
             [](RunConfig& c) -> auto& { return c.arch.hidden; }),
      number("fusion.heads", "4 attention heads",
             [](RunConfig& c) -> auto& { return c.arch.heads; }),
      number("fusion.point_dim", "reference encoder width (raw geometry 64)",
             [](RunConfig& c) -> auto& { return c.arch.point_dim; }),
      number("fusion.pool_k", "neighbourhood max-pool size",
             [](RunConfig& c) -> auto& { return c.arch.pool_k; }),
      number("fusion.head_hidden", "prediction head 32 -> 64 -> 1",
             [](RunConfig& c) -> auto& { return c.arch.head_hidden; }),
      number("fusion.norm_eps", "batch normalisation epsilon",
             [](RunConfig& c) -> auto& { return c.arch.norm.eps; }),
      number("fusion.norm_momentum", "running-statistics momentum",
             [](RunConfig& c) -> auto& { return c.arch.norm.momentum; }),
      number("fusion.lr", "AdamW learning rate 1e-4",
             [](RunConfig& c) -> auto& { return c.train.lr; }),
      named("fusion.lr_schedule", "constant",
            [](RunConfig& c) -> auto& { return c.train.schedule; }, schedule_name,
            parse_lr_schedule),
      number("fusion.weight_decay", "AdamW weight decay 1e-4",
             [](RunConfig& c) -> auto& { return c.train.weight_decay; }),
      number("fusion.epochs", "100 epochs",
             [](RunConfig& c) -> auto& { return c.train.epochs; }),
      number("fusion.batch_size", "8 meshes per step",
             [](RunConfig& c) -> auto& { return c.train.batch_size; }),
      number("fusion.m", "2048 sampled points per mesh",
             [](RunConfig& c) -> auto& { return c.train.m; }),
      number("fusion.w_kl", "KL weight 10",
             [](RunConfig& c) -> auto& { return c.train.loss.kl; }),
      number("fusion.w_cc", "CC weight 2",
             [](RunConfig& c) -> auto& { return c.train.loss.cc; }),
      number("predict.m", "2048 sampled points at inference",
             [](RunConfig& c) -> auto& { return c.predict_m; }),

      number("ppo.clip", "clip epsilon 0.2", [](RunConfig& c) -> auto& { return c.ppo.clip; }),
      number("ppo.gae_lambda", "GAE lambda 0.95",
             [](RunConfig& c) -> auto& { return c.ppo.gae_lambda; }),
      number("ppo.gamma", "discount 0.99", [](RunConfig& c) -> auto& { return c.ppo.gamma; }),
      number("ppo.total_timesteps", "200000 timesteps",
             [](RunConfig& c) -> auto& { return c.ppo.total_timesteps; }),
      number("ppo.rollout", "standard 2048", [](RunConfig& c) -> auto& { return c.ppo.rollout; }),
      number("ppo.epochs", "standard 10", [](RunConfig& c) -> auto& { return c.ppo.epochs; }),
      number("ppo.minibatch", "standard 64",
             [](RunConfig& c) -> auto& { return c.ppo.minibatch; }),
      number("ppo.lr", "standard 3e-4", [](RunConfig& c) -> auto& { return c.ppo.lr; }),
      number("ppo.entropy_coef", "standard 0.01",
             [](RunConfig& c) -> auto& { return c.ppo.entropy_coef; }),
      number("ppo.value_coef", "standard 0.5",
             [](RunConfig& c) -> auto& { return c.ppo.value_coef; }),
      number("ppo.hidden", "two tanh layers of 64",
             [](RunConfig& c) -> auto& { return c.ppo.hidden; }),
      named("ppo.start", "sample (start drawn from the saliency)",
            [](RunConfig& c) -> auto& { return c.ppo.start; }, start_name, parse_start_mode),

      number("reward.saliency", "saliency weight 1",
             [](RunConfig& c) -> auto& { return c.reward.saliency; }),
      number("reward.ior", "IOR penalty 0.2", [](RunConfig& c) -> auto& { return c.reward.ior; }),
      number("reward.ior_scale", "tanh(m / 2)",
             [](RunConfig& c) -> auto& { return c.reward.ior_scale; }),
      number("reward.new_region", "exploration bonus 0.15",
             [](RunConfig& c) -> auto& { return c.reward.new_region; }),
      number("reward.diversity", "diversity weight 0.1",
             [](RunConfig& c) -> auto& { return c.reward.diversity; }),
      number("reward.step_penalty", "step penalty 0.05",
             [](RunConfig& c) -> auto& { return c.reward.step_penalty; }),
      number("reward.region_grid", "4 x 4 x 4 bounding-box grid",
             [](RunConfig& c) -> auto& { return c.reward.region_grid; }),
      number("reward.diversity_window", "last 5 fixations",
             [](RunConfig& c) -> auto& { return c.reward.diversity_window; }),
      number("reward.diversity_scale", "0.2 of the bbox diagonal",
             [](RunConfig& c) -> auto& { return c.reward.diversity_scale; }),

      number("unproject.n_elev", "10 x 10 view grid",
             [](RunConfig& c) -> auto& { return c.unproject.n_elev; }),
      number("unproject.n_azim", "10 x 10 view grid",
             [](RunConfig& c) -> auto& { return c.unproject.n_azim; }),
      number("unproject.dist_scale", "camera at 0.65 x bbox diagonal",
             [](RunConfig& c) -> auto& { return c.unproject.dist_scale; }),
      number("unproject.image_size", "512 x 512 renders",
             [](RunConfig& c) -> auto& { return c.unproject.image_size; }),
      number("unproject.k", "ball query k = 100",
             [](RunConfig& c) -> auto& { return c.unproject.k; }),
      number("unproject.radius_frac", "ball radius 0.01 x diagonal",
             [](RunConfig& c) -> auto& { return c.unproject.radius_frac; }),
      number("unproject.alpha", "diffusion / DINO balance 0.5",
             [](RunConfig& c) -> auto& { return c.pixels.alpha; }),
      named("unproject.timestep_selection", "least_noisy (final 75% of steps)",
            [](RunConfig& c) -> auto& { return c.pixels.selection; }, selection_name,
            parse_selection),
      number("unproject.steps", "30 denoising steps",
             [](RunConfig& c) -> auto& { return c.pixels.steps; }),
      number("synth.diff_dim", "1280 diffusion channels",
             [](RunConfig& c) -> auto& { return c.pixels.diff_dim; }),
      number("synth.dino_dim", "768 DINO channels",
             [](RunConfig& c) -> auto& { return c.pixels.dino_dim; }),
      number("synth.feature_size", "64 x 64 feature grid",
             [](RunConfig& c) -> auto& { return c.pixels.feature_size; }),

      number("planted.sem_dim", "2048 channels",
             [](RunConfig& c) -> auto& { return c.planted.sem_dim; }),
      number("planted.bumps", "4 signed bumps",
             [](RunConfig& c) -> auto& { return c.planted.bumps; }),
      number("planted.bump_width", "0.15 of the diagonal",
             [](RunConfig& c) -> auto& { return c.planted.bump_width; }),
      number("planted.gain", "3", [](RunConfig& c) -> auto& { return c.planted.planted_gain; }),
      number("planted.noise", "0.05 on every channel",
             [](RunConfig& c) -> auto& { return c.planted.noise; }),
      number("planted.planted_noise", "0.3 on the planted channel",
             [](RunConfig& c) -> auto& { return c.planted.planted_noise; }),
      number("planted.curvature_k", "8 neighbours",
             [](RunConfig& c) -> auto& { return c.planted.curvature_k; }),
  };
}

}  // namespace

void RunConfig::propagate_seed() {
  train.seed = seed;
  ppo.seed = seed;
  pixels.seed = seed;
  planted.seed = seed;
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

void set_value(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& k : config_keys()) {
    if (k.key == key) {
      k.set(config, value);
      return;
    }
  }
  throw InvalidArgument("unknown config key '" + key + "'");
}

void apply_assignment(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw InvalidArgument("expected key=value, got '" + assignment + "'");
  set_value(config, assignment.substr(0, eq), assignment.substr(eq + 1));
}

void load_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    std::string body = line.substr(first, last - first + 1);
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t"), b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    set_value(config, trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
  }
}

std::string format_config(const RunConfig& config) {
  std::ostringstream out;
  for (const auto& k : config_keys()) out << k.key << '=' << k.get(config) << '\n';
  return out.str();
}

}  // namespace meshattn::cli
