#include "lcmae/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace lcmae {

void TrainConfig::validate() const {
  if (epochs < 1) throw ContractError("TrainConfig: epochs must be >= 1");
  if (batch_size < 1) throw ContractError("TrainConfig: batch_size must be >= 1");
  if (lr0 <= 0.0 || lr_min < 0.0 || lr_min > lr0)
    throw ContractError("TrainConfig: need lr0 > 0 and 0 <= lr_min <= lr0");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ContractError("TrainConfig: betas must lie in [0, 1)");
  if (eps <= 0.0) throw ContractError("TrainConfig: eps must be positive");
  if (weight_decay < 0.0) throw ContractError("TrainConfig: weight_decay must be >= 0");
  if (ckpt_every < 1) throw ContractError("TrainConfig: ckpt_every must be >= 1");
}

void DataConfig::validate() const {
  if (train_count < 1 || val_count < 0)
    throw ContractError("DataConfig: need train_count >= 1 and val_count >= 0");
  if (n_boxes < 0) throw ContractError("DataConfig: n_boxes must be >= 0");
  if (noise_std < 0.0) throw ContractError("DataConfig: noise_std must be >= 0");
}

void FullConfig::validate() const {
  model.validate();
  train.validate();
  data.validate();
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

int parse_int(const std::string& key, const std::string& v) {
  size_t pos = 0;
  int out;
  try {
    out = std::stoi(v, &pos);
  } catch (const std::exception&) {
    throw FormatError("config: bad integer for " + key + ": '" + v + "'");
  }
  if (pos != v.size()) throw FormatError("config: bad integer for " + key + ": '" + v + "'");
  return out;
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  size_t pos = 0;
  uint64_t out;
  try {
    out = std::stoull(v, &pos);
  } catch (const std::exception&) {
    throw FormatError("config: bad unsigned for " + key + ": '" + v + "'");
  }
  if (pos != v.size()) throw FormatError("config: bad unsigned for " + key + ": '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  size_t pos = 0;
  double out;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw FormatError("config: bad number for " + key + ": '" + v + "'");
  }
  if (pos != v.size()) throw FormatError("config: bad number for " + key + ": '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw FormatError("config: bad boolean for " + key + ": '" + v + "'");
}

using Setter = std::function<void(FullConfig&, const std::string&, const std::string&)>;
using Getter = std::function<std::string(const FullConfig&)>;

struct Field {
  const char* key;
  Setter set;
  Getter get;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> f = [] {
    std::vector<Field> v;
    auto add_int = [&v](const char* key, int& (*sel)(FullConfig&)) {
      v.push_back({key,
                   [sel](FullConfig& c, const std::string& k, const std::string& s) {
                     sel(c) = parse_int(k, s);
                   },
                   [sel](const FullConfig& c) {
                     return std::to_string(sel(const_cast<FullConfig&>(c)));
                   }});
    };
    auto add_dbl = [&v](const char* key, double& (*sel)(FullConfig&)) {
      v.push_back({key,
                   [sel](FullConfig& c, const std::string& k, const std::string& s) {
                     sel(c) = parse_double(k, s);
                   },
                   [sel](const FullConfig& c) {
                     return fmt_double(sel(const_cast<FullConfig&>(c)));
                   }});
    };
    auto add_u64 = [&v](const char* key, uint64_t& (*sel)(FullConfig&)) {
      v.push_back({key,
                   [sel](FullConfig& c, const std::string& k, const std::string& s) {
                     sel(c) = parse_u64(k, s);
                   },
                   [sel](const FullConfig& c) {
                     return std::to_string(sel(const_cast<FullConfig&>(c)));
                   }});
    };
    auto add_bool = [&v](const char* key, bool& (*sel)(FullConfig&)) {
      v.push_back({key,
                   [sel](FullConfig& c, const std::string& k, const std::string& s) {
                     sel(c) = parse_bool(k, s);
                   },
                   [sel](const FullConfig& c) {
                     return sel(const_cast<FullConfig&>(c)) ? "true" : "false";
                   }});
    };

    add_int("grid.height", [](FullConfig& c) -> int& { return c.model.grid.height; });
    add_int("grid.width", [](FullConfig& c) -> int& { return c.model.grid.width; });
    add_dbl("grid.elevation_min",
            [](FullConfig& c) -> double& { return c.model.grid.elevation_min; });
    add_dbl("grid.elevation_max",
            [](FullConfig& c) -> double& { return c.model.grid.elevation_max; });
    add_dbl("grid.azimuth_min",
            [](FullConfig& c) -> double& { return c.model.grid.azimuth_min; });
    add_dbl("grid.azimuth_max",
            [](FullConfig& c) -> double& { return c.model.grid.azimuth_max; });
    add_dbl("grid.max_range", [](FullConfig& c) -> double& { return c.model.grid.max_range; });
    add_dbl("grid.z_min", [](FullConfig& c) -> double& { return c.model.grid.z_min; });
    add_dbl("grid.z_max", [](FullConfig& c) -> double& { return c.model.grid.z_max; });
    add_int("patch_size", [](FullConfig& c) -> int& { return c.model.patch_size; });
    add_dbl("mask_ratio", [](FullConfig& c) -> double& { return c.model.mask_ratio; });
    add_int("camera_height", [](FullConfig& c) -> int& { return c.model.camera_height; });
    add_int("camera_width", [](FullConfig& c) -> int& { return c.model.camera_width; });

    add_int("lidar_encoder.embed_dim",
            [](FullConfig& c) -> int& { return c.model.lidar_encoder.embed_dim; });
    add_int("lidar_encoder.depth",
            [](FullConfig& c) -> int& { return c.model.lidar_encoder.depth; });
    add_int("lidar_encoder.n_heads",
            [](FullConfig& c) -> int& { return c.model.lidar_encoder.n_heads; });
    add_int("lidar_encoder.mlp_ratio",
            [](FullConfig& c) -> int& { return c.model.lidar_encoder.mlp_ratio; });
    add_int("camera_encoder.embed_dim",
            [](FullConfig& c) -> int& { return c.model.camera_encoder.embed_dim; });
    add_int("camera_encoder.depth",
            [](FullConfig& c) -> int& { return c.model.camera_encoder.depth; });
    add_int("camera_encoder.n_heads",
            [](FullConfig& c) -> int& { return c.model.camera_encoder.n_heads; });
    add_int("camera_encoder.mlp_ratio",
            [](FullConfig& c) -> int& { return c.model.camera_encoder.mlp_ratio; });
    add_int("fusion.embed_dim",
            [](FullConfig& c) -> int& { return c.model.fusion.embed_dim; });
    add_int("fusion.depth", [](FullConfig& c) -> int& { return c.model.fusion.depth; });
    add_int("fusion.n_heads", [](FullConfig& c) -> int& { return c.model.fusion.n_heads; });
    add_bool("fusion.bias_free_kv",
             [](FullConfig& c) -> bool& { return c.model.fusion.bias_free_kv; });
    add_int("decoder.embed_dim",
            [](FullConfig& c) -> int& { return c.model.decoder.embed_dim; });
    add_int("decoder.depth", [](FullConfig& c) -> int& { return c.model.decoder.depth; });
    add_int("decoder.n_heads", [](FullConfig& c) -> int& { return c.model.decoder.n_heads; });
    add_int("decoder.mlp_ratio",
            [](FullConfig& c) -> int& { return c.model.decoder.mlp_ratio; });

    v.push_back(
        {"loss_scope",
         [](FullConfig& c, const std::string& k, const std::string& s) {
           if (s == "masked_only")
             c.model.loss_scope = LossScope::masked_only;
           else if (s == "all_patches")
             c.model.loss_scope = LossScope::all_patches;
           else
             throw FormatError("config: bad value for " + k + ": '" + s + "'");
         },
         [](const FullConfig& c) {
           return std::string(c.model.loss_scope == LossScope::masked_only ? "masked_only"
                                                                           : "all_patches");
         }});
    add_bool("normalize_targets",
             [](FullConfig& c) -> bool& { return c.model.normalize_targets; });
    add_u64("seed", [](FullConfig& c) -> uint64_t& { return c.model.seed; });

    add_int("train.epochs", [](FullConfig& c) -> int& { return c.train.epochs; });
    add_int("train.batch_size", [](FullConfig& c) -> int& { return c.train.batch_size; });
    add_dbl("train.lr0", [](FullConfig& c) -> double& { return c.train.lr0; });
    add_dbl("train.lr_min", [](FullConfig& c) -> double& { return c.train.lr_min; });
    add_dbl("train.beta1", [](FullConfig& c) -> double& { return c.train.beta1; });
    add_dbl("train.beta2", [](FullConfig& c) -> double& { return c.train.beta2; });
    add_dbl("train.eps", [](FullConfig& c) -> double& { return c.train.eps; });
    add_dbl("train.weight_decay",
            [](FullConfig& c) -> double& { return c.train.weight_decay; });
    add_int("train.ckpt_every", [](FullConfig& c) -> int& { return c.train.ckpt_every; });

    add_int("data.train_count", [](FullConfig& c) -> int& { return c.data.train_count; });
    add_int("data.val_count", [](FullConfig& c) -> int& { return c.data.val_count; });
    add_u64("data.seed", [](FullConfig& c) -> uint64_t& { return c.data.seed; });
    add_int("data.n_boxes", [](FullConfig& c) -> int& { return c.data.n_boxes; });
    add_dbl("data.noise_std", [](FullConfig& c) -> double& { return c.data.noise_std; });
    return v;
  }();
  return f;
}

}  // namespace

FullConfig parse_config(std::istream& in) {
  FullConfig cfg;
  std::map<std::string, const Field*> by_key;
  for (const Field& f : fields()) by_key[f.key] = &f;
  std::map<std::string, bool> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = line;
    size_t hash = s.find('#');
    if (hash != std::string::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw FormatError("config line " + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(s.substr(0, eq));
    std::string val = trim(s.substr(eq + 1));
    auto it = by_key.find(key);
    if (it == by_key.end())
      throw FormatError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (seen[key])
      throw FormatError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    seen[key] = true;
    it->second->set(cfg, key, val);
  }
  cfg.validate();
  return cfg;
}

FullConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("config: cannot open " + path);
  return parse_config(in);
}

std::string serialize_config(const FullConfig& cfg) {
  std::ostringstream out;
  for (const Field& f : fields()) out << f.key << " = " << f.get(cfg) << "\n";
  return out.str();
}

void save_config_file(const std::string& path, const FullConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw FormatError("config: cannot write " + path);
  out << serialize_config(cfg);
}

uint64_t config_digest(const FullConfig& cfg) {
  return fnv1a64(serialize_config(cfg));
}

}  // namespace lcmae
