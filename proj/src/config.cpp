// SPDX-License-Identifier: Apache-2.0
#include "empgan/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "empgan/error.hpp"

namespace empgan {

Ablation ablation_for(Variant v) {
  switch (v) {
    case Variant::EmpG: return {true, false, false, false};
    case Variant::EmpD: return {false, true, true, true};
    case Variant::EmpWDNext: return {false, false, true, true};
    case Variant::EmpWD: return {false, false, false, true};
    case Variant::EmpGAN: return {};
  }
  return {};
}

Variant variant_of(const Ablation& a) {
  for (Variant v : {Variant::EmpG, Variant::EmpD, Variant::EmpWDNext, Variant::EmpWD, Variant::EmpGAN})
    if (ablation_for(v) == a) return v;
  if (a.emp_g_only) return Variant::EmpG;
  throw ConfigError("ablation flags do not correspond to a named variant");
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::EmpG: return "EmpG";
    case Variant::EmpD: return "EmpD";
    case Variant::EmpWDNext: return "EmpWD-next";
    case Variant::EmpWD: return "EmpWD";
    case Variant::EmpGAN: return "EmpGAN";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : {Variant::EmpG, Variant::EmpD, Variant::EmpWDNext, Variant::EmpWD, Variant::EmpGAN})
    if (variant_name(v) == name) return v;
  EMPGAN_THROW(ConfigError, "unknown variant '" << name << "' (expected EmpG, EmpD, EmpWD-next, EmpWD or EmpGAN)");
}

namespace {

std::string trim(std::string s) {
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    EMPGAN_THROW(ConfigError, "config key '" << key << "': cannot parse '" << v << "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    EMPGAN_THROW(ConfigError, "config key '" << key << "': cannot parse '" << v << "' as a number");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  EMPGAN_THROW(ConfigError, "config key '" << key << "': expected a boolean, got '" << v << "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string ablation_text(const Ablation& a) {
  std::vector<std::string> on;
  if (a.emp_g_only) on.push_back("emp_g_only");
  if (a.vanilla_gan) on.push_back("vanilla_gan");
  if (a.no_feedback) on.push_back("no_feedback");
  if (a.no_emo_critic) on.push_back("no_emo_critic");
  std::string s;
  for (const auto& x : on) s += (s.empty() ? "" : ",") + x;
  return s.empty() ? "none" : s;
}

}  // namespace

void TrainConfig::set(const std::string& key, const std::string& raw) {
  std::string v = trim(raw);
  auto size = [&] { return parse_number<std::size_t>(key, v); };
  if (key == "hidden") hidden = size();
  else if (key == "embed") embed = size();
  else if (key == "emo_embed") emo_embed = size();
  else if (key == "label_embed") label_embed = size();
  else if (key == "conv_filters") conv_filters = size();
  else if (key == "conv_widths") {
    conv_widths.clear();
    for (const auto& w : split_list(v)) conv_widths.push_back(parse_number<std::size_t>(key, w));
  } else if (key == "batch") batch = size();
  else if (key == "dropout") dropout = parse_double(key, v);
  else if (key == "lr") lr = parse_double(key, v);
  else if (key == "beta1") beta1 = parse_double(key, v);
  else if (key == "beta2") beta2 = parse_double(key, v);
  else if (key == "eps_adam") eps_adam = parse_double(key, v);
  else if (key == "clip_norm") clip_norm = parse_double(key, v);
  else if (key == "epochs") epochs = size();
  else if (key == "pretrain_epochs") pretrain_epochs = size();
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, v);
  else if (key == "n_critic") n_critic = size();
  else if (key == "sigma") sigma = parse_double(key, v);
  else if (key == "lambda_adv") lambda_adv = parse_double(key, v);
  else if (key == "tf_every") tf_every = size();
  else if (key == "gp_squared") gp_squared = parse_bool(key, v);
  else if (key == "gp_per_step") gp_per_step = parse_bool(key, v);
  else if (key == "emotion_losses") emotion_losses = parse_bool(key, v);
  else if (key == "max_len") max_len = size();
  else if (key == "min_count") min_count = size();
  else if (key == "label_target") {
    if (v == "response") label_target = LabelTarget::Response;
    else if (v == "last_context_turn") label_target = LabelTarget::LastContextTurn;
    else EMPGAN_THROW(ConfigError, "label_target must be response or last_context_turn, got '" << v << "'");
  } else if (key == "emo_target") {
    if (v == "response") emo_target = EmotionWordTarget::Response;
    else if (v == "feedback") emo_target = EmotionWordTarget::Feedback;
    else EMPGAN_THROW(ConfigError, "emo_target must be response or feedback, got '" << v << "'");
  } else if (key == "ablation") {
    ablation = {};
    for (const auto& flag : split_list(v)) {
      if (flag == "none") continue;
      if (flag == "emp_g_only") ablation.emp_g_only = true;
      else if (flag == "vanilla_gan") ablation.vanilla_gan = true;
      else if (flag == "no_feedback") ablation.no_feedback = true;
      else if (flag == "no_emo_critic") ablation.no_emo_critic = true;
      else EMPGAN_THROW(ConfigError, "unknown ablation flag '" << flag << "'");
    }
  } else if (key == "variant") {
    ablation = ablation_for(parse_variant(v));
  } else {
    EMPGAN_THROW(ConfigError, "unknown config key '" << key << "'");
  }
}

void TrainConfig::validate() const {
  auto positive = [](const char* name, double v) {
    if (!(v > 0)) EMPGAN_THROW(ConfigError, "config key '" << name << "' must be positive, got " << v);
  };
  positive("hidden", static_cast<double>(hidden));
  positive("embed", static_cast<double>(embed));
  positive("emo_embed", static_cast<double>(emo_embed));
  positive("label_embed", static_cast<double>(label_embed));
  positive("conv_filters", static_cast<double>(conv_filters));
  positive("batch", static_cast<double>(batch));
  positive("lr", lr);
  positive("eps_adam", eps_adam);
  positive("n_critic", static_cast<double>(n_critic));
  positive("max_len", static_cast<double>(max_len));
  positive("tf_every", static_cast<double>(tf_every));
  positive("min_count", static_cast<double>(min_count));
  if (conv_widths.empty()) throw ConfigError("conv_widths must list at least one width");
  for (auto w : conv_widths)
    if (w == 0) throw ConfigError("conv_widths must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) EMPGAN_THROW(ConfigError, "dropout must lie in [0,1), got " << dropout);
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("beta1 and beta2 must lie in [0,1)");
  if (sigma < 0.0) throw ConfigError("sigma must be non-negative");
  if (lambda_adv < 0.0) throw ConfigError("lambda_adv must be non-negative");
  if (clip_norm < 0.0) throw ConfigError("clip_norm must be non-negative");
}

std::vector<std::string> TrainConfig::keys() {
  return {"ablation",   "batch",        "beta1",      "beta2",           "clip_norm",   "conv_filters",
          "conv_widths", "dropout",     "emo_embed",  "emo_target",      "embed",       "emotion_losses",
          "epochs",     "eps_adam",     "gp_per_step", "gp_squared",     "hidden",      "label_embed",
          "label_target", "lambda_adv", "lr",         "max_len",         "min_count",   "n_critic",
          "pretrain_epochs", "seed",    "sigma",      "tf_every"};
}

std::string TrainConfig::to_text() const {
  std::ostringstream o;
  o.precision(17);
  auto widths = [&] {
    std::string s;
    for (auto w : conv_widths) s += (s.empty() ? "" : ",") + std::to_string(w);
    return s;
  };
  std::map<std::string, std::string> kv;
  auto num = [](double d) {
    std::ostringstream x;
    x.precision(17);
    x << d;
    return x.str();
  };
  kv["ablation"] = ablation_text(ablation);
  kv["batch"] = std::to_string(batch);
  kv["beta1"] = num(beta1);
  kv["beta2"] = num(beta2);
  kv["clip_norm"] = num(clip_norm);
  kv["conv_filters"] = std::to_string(conv_filters);
  kv["conv_widths"] = widths();
  kv["dropout"] = num(dropout);
  kv["emo_embed"] = std::to_string(emo_embed);
  kv["emo_target"] = emo_target == EmotionWordTarget::Response ? "response" : "feedback";
  kv["embed"] = std::to_string(embed);
  kv["emotion_losses"] = emotion_losses ? "true" : "false";
  kv["epochs"] = std::to_string(epochs);
  kv["eps_adam"] = num(eps_adam);
  kv["gp_per_step"] = gp_per_step ? "true" : "false";
  kv["gp_squared"] = gp_squared ? "true" : "false";
  kv["hidden"] = std::to_string(hidden);
  kv["label_embed"] = std::to_string(label_embed);
  kv["label_target"] = label_target == LabelTarget::Response ? "response" : "last_context_turn";
  kv["lambda_adv"] = num(lambda_adv);
  kv["lr"] = num(lr);
  kv["max_len"] = std::to_string(max_len);
  kv["min_count"] = std::to_string(min_count);
  kv["n_critic"] = std::to_string(n_critic);
  kv["pretrain_epochs"] = std::to_string(pretrain_epochs);
  kv["seed"] = std::to_string(seed);
  kv["sigma"] = num(sigma);
  kv["tf_every"] = std::to_string(tf_every);
  for (const auto& [k, v] : kv) o << k << " = " << v << "\n";
  return o.str();
}

std::vector<std::string> RunConfig::path_keys() {
  return {"adjectives", "checkpoint", "context", "corpus", "data_dir", "hyp", "lexicon", "out", "out_dir", "ref", "resume"};
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto keys = path_keys();
  if (std::find(keys.begin(), keys.end(), key) != keys.end()) {
    paths[key] = trim(value);
    return;
  }
  train.set(key, value);
}

std::string RunConfig::path(const std::string& key) const {
  auto it = paths.find(key);
  if (it == paths.end() || it->second.empty()) EMPGAN_THROW(ConfigError, "missing required setting '" << key << "'");
  return it->second;
}

std::string RunConfig::to_text() const {
  std::string s = train.to_text();
  for (const auto& [k, v] : paths) s += k + " = " + v + "\n";
  return s;
}

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text, const std::string& origin) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      EMPGAN_THROW(ConfigError, origin << ":" << n << ": expected 'key = value', got '" << t << "'");
    out.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return out;
}

RunConfig load_run_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) EMPGAN_THROW(ConfigError, "cannot open config file " << file);
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig rc;
  for (const auto& [k, v] : parse_key_values(ss.str(), file.string())) {
    try {
      rc.set(k, v);
    } catch (const ConfigError& e) {
      EMPGAN_THROW(ConfigError, file.string() << ": " << e.what());
    }
  }
  return rc;
}

}  // namespace empgan
