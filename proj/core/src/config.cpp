#include "advseq/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "advseq/data.hpp"

namespace advseq::train {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::int64_t to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const std::int64_t v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw Error("config: " + key + " expects an integer, got '" + value + "'");
  }
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw Error("config: " + key + " expects a number, got '" + value + "'");
  }
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "on" || value == "true" || value == "1") return true;
  if (value == "off" || value == "false" || value == "0") return false;
  throw Error("config: " + key + " expects on/off, got '" + value + "'");
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw Error("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw Error("config line " + std::to_string(line_no) + ": expected key = value");
    }

    if (key == "config_version") {
      c.config_version = static_cast<int>(to_int(key, value));
      if (c.config_version != 1) {
        throw Error("config: unsupported config_version " + value);
      }
    } else if (key == "generator") c.generator = value;
    else if (key == "discriminator") c.discriminator = value;
    else if (key == "hidden") c.hidden = to_int(key, value);
    else if (key == "noise_dim") c.noise_dim = to_int(key, value);
    else if (key == "kernel_width") c.kernel_width = to_int(key, value);
    else if (key == "residual_blocks") c.residual_blocks = to_int(key, value);
    else if (key == "batchnorm") c.batchnorm = to_bool(key, value);
    else if (key == "condition") c.condition = value;
    else if (key == "sentiment_labels") c.sentiment_labels = value;
    else if (key == "objective") c.objective.kind = objectives::parse_objective(value);
    else if (key == "clip") c.objective.clip_bound = to_double(key, value);
    else if (key == "penalty_weight") c.objective.penalty_weight = to_double(key, value);
    else if (key == "n_critic") c.objective.critic_steps = static_cast<int>(to_int(key, value));
    else if (key == "penalty_point") {
      if (value == "interpolate") c.objective.penalty_point = objectives::PenaltyPoint::kInterpolate;
      else if (value == "at-fake") c.objective.penalty_point = objectives::PenaltyPoint::kAtFake;
      else throw Error("config: penalty_point expects interpolate|at-fake, got '" + value + "'");
    }
    else if (key == "corpus") c.corpus = value;
    else if (key == "level") c.level = value;
    else if (key == "top_k") c.top_k = to_int(key, value);
    else if (key == "start_length") c.start_length = to_int(key, value);
    else if (key == "max_length") c.max_length = to_int(key, value);
    else if (key == "epochs_per_increment") c.epochs_per_increment = to_int(key, value);
    else if (key == "batch_size") c.batch_size = to_int(key, value);
    else if (key == "epochs") c.epochs = to_int(key, value);
    else if (key == "g_optimizer") c.g_optimizer.kind = value;
    else if (key == "d_optimizer") c.d_optimizer.kind = value;
    else if (key == "g_lr") c.g_optimizer.learning_rate = to_double(key, value);
    else if (key == "d_lr") c.d_optimizer.learning_rate = to_double(key, value);
    else if (key == "beta1") c.g_optimizer.beta1 = c.d_optimizer.beta1 = to_double(key, value);
    else if (key == "beta2") c.g_optimizer.beta2 = c.d_optimizer.beta2 = to_double(key, value);
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(to_int(key, value));
    else if (key == "eval_samples") c.eval_samples = to_int(key, value);
    else if (key == "nll_eval_samples") c.nll_eval_samples = to_int(key, value);
    else if (key == "eval_grammar") c.eval_grammar = value;
    else if (key == "eval_pcfg") c.eval_pcfg = value;
    else if (key == "divergence_threshold") c.divergence_threshold = to_double(key, value);
    else if (key == "stop_accuracy") c.stop_accuracy = to_double(key, value);
    else if (key == "time_budget_seconds") c.time_budget_seconds = to_int(key, value);
    else if (key == "stop_uniqueness") c.stop_uniqueness = to_double(key, value);
    else if (key == "run_dir") c.run_dir = value;
    else if (key == "resume") c.resume = value;
    else throw Error("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  return c;
}

ExperimentConfig ExperimentConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse(os.str());
}

ExperimentConfig ExperimentConfig::resolved() const {
  ExperimentConfig c = *this;
  auto check_arch = [](const std::string& what, const std::string& v) {
    if (v != "lstm" && v != "cnn") {
      throw Error("config: " + what + " must be lstm or cnn, got '" + v + "'");
    }
  };
  check_arch("generator", c.generator);
  check_arch("discriminator", c.discriminator);
  if (c.condition != "none" && c.condition != "question" && c.condition != "sentiment") {
    throw Error("config: condition must be none|question|sentiment, got '" + c.condition + "'");
  }
  if (c.condition != "none" && (c.generator != "cnn" || c.discriminator != "cnn")) {
    throw Error("unsupported configuration: conditioning requires a convolutional architecture");
  }
  if (c.condition == "sentiment" && c.sentiment_labels.empty()) {
    throw Error("config: condition = sentiment requires sentiment_labels");
  }
  (void)data::parse_level(c.level);
  c.objective.validate();
  if (c.hidden < 1 || c.noise_dim < 1) throw Error("config: hidden and noise_dim must be >= 1");
  if (c.batch_size < 1) throw Error("config: batch_size must be >= 1");
  if (c.epochs < 1) throw Error("config: epochs must be >= 1");
  if (c.top_k < 1) throw Error("config: top_k must be >= 1");
  if (c.epochs_per_increment < 1) throw Error("config: epochs_per_increment must be >= 1");
  if (c.eval_samples < 1) throw Error("config: eval_samples must be >= 1");
  if (c.corpus.empty()) throw Error("config: corpus path is required");

  if (c.start_length == 0) {
    c.start_length = (c.level == "char" || c.level == "character") ? 13 : 5;
  }
  if (!c.batchnorm.has_value()) {
    // per-sample gradient penalties are incompatible with cross-batch statistics
    c.batchnorm = !c.objective.uses_penalty();
  }
  if (c.g_optimizer.learning_rate == 0.0) {
    c.g_optimizer.learning_rate = (c.generator == "lstm") ? 2e-3 : 1e-4;
  }
  if (c.d_optimizer.learning_rate == 0.0) {
    c.d_optimizer.learning_rate = (c.discriminator == "lstm") ? 2e-3 : 1e-4;
  }
  auto check_opt = [](const std::string& what, const OptimizerConfig& o) {
    if (o.kind != "adam" && o.kind != "sgd") {
      throw Error("config: " + what + " must be adam or sgd, got '" + o.kind + "'");
    }
  };
  check_opt("g_optimizer", c.g_optimizer);
  check_opt("d_optimizer", c.d_optimizer);
  return c;
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream os;
  os << "config_version = " << config_version << "\n"
     << "generator = " << generator << "\n"
     << "discriminator = " << discriminator << "\n"
     << "hidden = " << hidden << "\n"
     << "noise_dim = " << noise_dim << "\n"
     << "kernel_width = " << kernel_width << "\n"
     << "residual_blocks = " << residual_blocks << "\n";
  if (batchnorm.has_value()) os << "batchnorm = " << (*batchnorm ? "on" : "off") << "\n";
  os << "condition = " << condition << "\n";
  if (!sentiment_labels.empty()) os << "sentiment_labels = " << sentiment_labels << "\n";
  os << "objective = " << objectives::objective_name(objective.kind) << "\n"
     << "clip = " << fmt(objective.clip_bound) << "\n"
     << "penalty_weight = " << fmt(objective.penalty_weight) << "\n"
     << "n_critic = " << objective.critic_steps << "\n"
     << "penalty_point = "
     << (objective.penalty_point == objectives::PenaltyPoint::kInterpolate ? "interpolate"
                                                                           : "at-fake")
     << "\n"
     << "corpus = " << corpus << "\n"
     << "level = " << level << "\n"
     << "top_k = " << top_k << "\n"
     << "start_length = " << start_length << "\n"
     << "max_length = " << max_length << "\n"
     << "epochs_per_increment = " << epochs_per_increment << "\n"
     << "batch_size = " << batch_size << "\n"
     << "epochs = " << epochs << "\n"
     << "g_optimizer = " << g_optimizer.kind << "\n"
     << "d_optimizer = " << d_optimizer.kind << "\n"
     << "g_lr = " << fmt(g_optimizer.learning_rate) << "\n"
     << "d_lr = " << fmt(d_optimizer.learning_rate) << "\n"
     << "beta1 = " << fmt(g_optimizer.beta1) << "\n"
     << "beta2 = " << fmt(g_optimizer.beta2) << "\n"
     << "seed = " << seed << "\n"
     << "eval_samples = " << eval_samples << "\n"
     << "nll_eval_samples = " << nll_eval_samples << "\n";
  if (!eval_grammar.empty()) os << "eval_grammar = " << eval_grammar << "\n";
  if (!eval_pcfg.empty()) os << "eval_pcfg = " << eval_pcfg << "\n";
  os << "divergence_threshold = " << fmt(divergence_threshold) << "\n";
  if (stop_accuracy > 0.0) os << "stop_accuracy = " << fmt(stop_accuracy) << "\n";
  if (stop_uniqueness > 0.0) os << "stop_uniqueness = " << fmt(stop_uniqueness) << "\n";
  if (time_budget_seconds > 0) os << "time_budget_seconds = " << time_budget_seconds << "\n";
  os << "run_dir = " << run_dir << "\n";
  if (!resume.empty()) os << "resume = " << resume << "\n";
  return os.str();
}

}  // namespace advseq::train
