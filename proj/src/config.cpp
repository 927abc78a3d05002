#include "csireid/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "csireid/error.hpp"

namespace csireid {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    const auto item = trim(s.substr(start, comma == std::string_view::npos ? s.size() - start : comma - start));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw ConfigError("config key '" + key + "': '" + value + "' is not " + want);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (v.empty() || ec != std::errc() || ptr != end) bad_value(key, v, "a non-negative integer");
  return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  return static_cast<std::size_t>(to_u64(key, v));
}

double to_double(const std::string& key, const std::string& v) {
  if (v.empty()) bad_value(key, v, "a number");
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size()) bad_value(key, v, "a number");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

template <typename T, typename F>
std::string join(const std::vector<T>& items, F fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    out += fmt(items[i]);
  }
  return out;
}

struct Key {
  const char* name;
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define SIZE_KEY(NAME, FIELD)                                                                  \
  Key {                                                                                        \
    NAME, [](RunConfig& c, const std::string& k, const std::string& v) { c.FIELD = to_size(k, v); }, \
        [](const RunConfig& c) { return std::to_string(c.FIELD); }                            \
  }
#define DOUBLE_KEY(NAME, FIELD)                                                                   \
  Key {                                                                                           \
    NAME, [](RunConfig& c, const std::string& k, const std::string& v) { c.FIELD = to_double(k, v); }, \
        [](const RunConfig& c) { return fmt_double(c.FIELD); }                                    \
  }
#define BOOL_KEY(NAME, FIELD)                                                                   \
  Key {                                                                                         \
    NAME, [](RunConfig& c, const std::string& k, const std::string& v) { c.FIELD = to_bool(k, v); }, \
        [](const RunConfig& c) { return fmt_bool(c.FIELD); }                                    \
  }
#define STRING_KEY(NAME, FIELD)                                                               \
  Key {                                                                                       \
    NAME, [](RunConfig& c, const std::string&, const std::string& v) { c.FIELD = v; },        \
        [](const RunConfig& c) { return c.FIELD; }                                            \
  }

const std::vector<Key>& registry() {
  static const std::vector<Key> keys = {
      Key{"seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); },
          [](const RunConfig& c) { return std::to_string(c.seed); }},
      STRING_KEY("data_dir", data_dir),
      STRING_KEY("manifest", manifest),
      STRING_KEY("out_dir", out_dir),
      STRING_KEY("checkpoint", checkpoint),

      SIZE_KEY("subjects", synth.subjects),
      SIZE_KEY("samples_per_subject", synth.samples_per_subject),
      SIZE_KEY("rx", synth.dims.n_rx),
      SIZE_KEY("tx", synth.dims.n_tx),
      SIZE_KEY("subcarriers", synth.dims.n_sub),
      SIZE_KEY("synth_packets", synth.dims.n_pkt),
      DOUBLE_KEY("noise_level", synth.noise_level),
      DOUBLE_KEY("train_fraction", synth.train_fraction),

      Key{"features",
          [](RunConfig& c, const std::string& k, const std::string& v) {
            if (v == "amplitude") c.experiment.preprocess.features = FeatureKind::amplitude;
            else if (v == "phase") c.experiment.preprocess.features = FeatureKind::phase;
            else bad_value(k, v, "amplitude or phase");
          },
          [](const RunConfig& c) {
            return std::string(c.experiment.preprocess.features == FeatureKind::amplitude ? "amplitude" : "phase");
          }},
      BOOL_KEY("hampel", experiment.preprocess.hampel),
      SIZE_KEY("hampel_window", experiment.preprocess.hampel_cfg.window),
      DOUBLE_KEY("hampel_xi", experiment.preprocess.hampel_cfg.xi),
      Key{"phase_offset_sign",
          [](RunConfig& c, const std::string& k, const std::string& v) {
            auto& s = c.experiment.preprocess.sanitize_cfg.offset_sign;
            if (v == "conventional_minus_b") s = OffsetSign::conventional_minus_b;
            else if (v == "paper_plus_b") s = OffsetSign::paper_plus_b;
            else bad_value(k, v, "conventional_minus_b or paper_plus_b");
          },
          [](const RunConfig& c) {
            return std::string(c.experiment.preprocess.sanitize_cfg.offset_sign == OffsetSign::conventional_minus_b
                                   ? "conventional_minus_b"
                                   : "paper_plus_b");
          }},
      BOOL_KEY("phase_unwrap", experiment.preprocess.sanitize_cfg.unwrap),
      SIZE_KEY("packets", experiment.preprocess.packets),
      BOOL_KEY("standardize", experiment.preprocess.standardize),

      BOOL_KEY("augment", experiment.train.augment),
      DOUBLE_KEY("augment_prob", experiment.train.augment_policy.apply_prob),
      DOUBLE_KEY("noise_sigma", experiment.train.augment_policy.noise_sigma),
      DOUBLE_KEY("scale_low", experiment.train.augment_policy.scale_low),
      DOUBLE_KEY("scale_high", experiment.train.augment_policy.scale_high),
      Key{"shift_range",
          [](RunConfig& c, const std::string& k, const std::string& v) {
            c.experiment.train.augment_policy.shift_range = static_cast<std::int64_t>(to_u64(k, v));
          },
          [](const RunConfig& c) { return std::to_string(c.experiment.train.augment_policy.shift_range); }},

      Key{"arch",
          [](RunConfig& c, const std::string&, const std::string& v) { c.experiment.encoder.arch = parse_arch(v); },
          [](const RunConfig& c) { return std::string(to_string(c.experiment.encoder.arch)); }},
      SIZE_KEY("layers", experiment.encoder.layers),
      SIZE_KEY("hidden", experiment.encoder.hidden),
      SIZE_KEY("heads", experiment.encoder.heads),
      SIZE_KEY("ff_dim", experiment.encoder.ff_dim),
      DOUBLE_KEY("dropout", experiment.encoder.dropout),
      SIZE_KEY("signature_dim", experiment.encoder.signature_dim),
      Key{"pooling",
          [](RunConfig& c, const std::string&, const std::string& v) {
            c.experiment.encoder.pooling = parse_pooling(v);
          },
          [](const RunConfig& c) { return std::string(to_string(c.experiment.encoder.pooling)); }},

      SIZE_KEY("epochs", experiment.train.epochs),
      SIZE_KEY("batch", experiment.train.batch),
      SIZE_KEY("folds", experiment.train.folds),
      DOUBLE_KEY("val_fraction", experiment.train.val_fraction),
      DOUBLE_KEY("temperature", experiment.train.temperature),
      DOUBLE_KEY("lr", experiment.train.schedule.base_lr),
      DOUBLE_KEY("lr_gamma", experiment.train.schedule.gamma),
      Key{"lr_step_epochs",
          [](RunConfig& c, const std::string& k, const std::string& v) {
            c.experiment.train.schedule.step_epochs = to_u64(k, v);
          },
          [](const RunConfig& c) { return std::to_string(c.experiment.train.schedule.step_epochs); }},
      DOUBLE_KEY("adam_beta1", experiment.train.adam.beta1),
      DOUBLE_KEY("adam_beta2", experiment.train.adam.beta2),
      DOUBLE_KEY("adam_eps", experiment.train.adam.eps),

      Key{"ablate_archs",
          [](RunConfig& c, const std::string& k, const std::string& v) {
            c.ablate_archs.clear();
            for (const auto& item : split_list(v)) c.ablate_archs.push_back(parse_arch(item));
            if (c.ablate_archs.empty()) bad_value(k, v, "a non-empty list");
          },
          [](const RunConfig& c) {
            return join(c.ablate_archs, [](Arch a) { return std::string(to_string(a)); });
          }},
      Key{"ablate_packets",
          [](RunConfig& c, const std::string& k, const std::string& v) {
            c.ablate_packets.clear();
            for (const auto& item : split_list(v)) c.ablate_packets.push_back(to_size(k, item));
            if (c.ablate_packets.empty()) bad_value(k, v, "a non-empty list");
          },
          [](const RunConfig& c) {
            return join(c.ablate_packets, [](std::size_t p) { return std::to_string(p); });
          }},
      Key{"ablate_hampel",
          [](RunConfig& c, const std::string& k, const std::string& v) {
            c.ablate_hampel.clear();
            for (const auto& item : split_list(v)) c.ablate_hampel.push_back(to_bool(k, item));
            if (c.ablate_hampel.empty()) bad_value(k, v, "a non-empty list");
          },
          [](const RunConfig& c) { return join(c.ablate_hampel, [](bool b) { return fmt_bool(b); }); }},
      Key{"ablate_augment",
          [](RunConfig& c, const std::string& k, const std::string& v) {
            c.ablate_augment.clear();
            for (const auto& item : split_list(v)) c.ablate_augment.push_back(to_bool(k, item));
            if (c.ablate_augment.empty()) bad_value(k, v, "a non-empty list");
          },
          [](const RunConfig& c) { return join(c.ablate_augment, [](bool b) { return fmt_bool(b); }); }},
      Key{"ablate_layers",
          [](RunConfig& c, const std::string& k, const std::string& v) {
            c.ablate_layers.clear();
            for (const auto& item : split_list(v)) c.ablate_layers.push_back(to_size(k, item));
            if (c.ablate_layers.empty()) bad_value(k, v, "a non-empty list");
          },
          [](const RunConfig& c) {
            return join(c.ablate_layers, [](std::size_t p) { return std::to_string(p); });
          }},

      DOUBLE_KEY("gradcheck_eps", gradcheck_eps),
      SIZE_KEY("gradcheck_packets", gradcheck_packets),
      SIZE_KEY("gradcheck_entries", gradcheck_entries),
  };
  return keys;
}

#undef SIZE_KEY
#undef DOUBLE_KEY
#undef BOOL_KEY
#undef STRING_KEY

}  // namespace

void RunConfig::propagate_seed() {
  synth.seed = seed;
  experiment.train.seed = seed;
}

void apply_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : registry()) {
    if (key == k.name) {
      try {
        k.set(cfg, key, value);
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        throw ConfigError("config key '" + key + "': " + e.what());
      }
      cfg.explicit_keys.insert(key);
      if (key == "seed") cfg.propagate_seed();
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void apply_config_text(RunConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    apply_config_value(cfg, key, trim(std::string_view(body).substr(eq + 1)));
  }
}

RunConfig parse_config(const std::optional<std::filesystem::path>& file, const ConfigOverrides& overrides) {
  RunConfig cfg;
  cfg.propagate_seed();
  if (file) {
    std::ifstream in(*file, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + file->string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    apply_config_text(cfg, text.str());
  }
  for (const auto& [key, value] : overrides) apply_config_value(cfg, key, value);
  return cfg;
}

std::string dump_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& k : registry()) {
    out += k.name;
    out += " = ";
    out += k.get(cfg);
    out += "\n";
  }
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : registry()) out.emplace_back(k.name);
  return out;
}

std::string config_hash(const RunConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : dump_config(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace csireid
