// Run configuration: JSON schema with strict unknown-key rejection,
// architecture building, and dataset assembly. Every tunable from the other
// modules appears here with its default so a generated reference config is
// complete.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include <admmq/admm.hpp>
#include <admmq/common.hpp>
#include <admmq/data.hpp>
#include <admmq/model.hpp>
#include <admmq/progressive.hpp>

namespace admmq {

using json = nlohmann::json;

namespace detail {

inline void check_keys(const json& obj, const std::string& path,
                       std::initializer_list<const char*> allowed) {
  if (!obj.is_object())
    throw ConfigError("config: '" + path + "' must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok |= (it.key() == a);
    if (!ok)
      throw ConfigError("config: unknown key '" + it.key() + "' in '" + path +
                        "'");
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T def) {
  if (!obj.contains(key)) return def;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad value for '") + key +
                      "': " + e.what());
  }
}

}  // namespace detail

struct DatasetConfig {
  std::string kind = "mnist";  // or "blobs"
  std::string dir = "data/mnist";
  std::size_t train_subset = 10000;  // 0 = use the whole training pool
  std::size_t val_size = 5000;
  // blobs
  int classes = 4;
  int samples_per_class = 250;
  int dim = 16;
  double spacing = 5.0;
};

struct PretrainConfig {
  int epochs = 10;
  std::size_t batch_size = 64;
  OptimizerConfig optimizer;
};

struct QuantizeConfig {
  QuantMode mode = QuantMode::binary;
  std::vector<std::string> exclude;
  AdmmConfig admm;
  int num_steps = 3;
  std::vector<std::string> staging;  // empty = default staging for `mode`
  bool rho_reset_per_step = true;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "runs/default";
  DatasetConfig dataset;
  json architecture = "lenet5";  // preset name or {input_shape, layers}
  PretrainConfig pretrain;
  QuantizeConfig quantize;
};

inline json optimizer_to_json(const OptimizerConfig& c) {
  return json{{"algo", c.algo == OptAlgo::sgd ? "sgd" : "adam"},
              {"lr", c.lr},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"eps", c.eps}};
}

inline OptimizerConfig optimizer_from_json(const json& j, const std::string& path) {
  detail::check_keys(j, path, {"algo", "lr", "beta1", "beta2", "eps"});
  OptimizerConfig c;
  std::string algo = detail::get_or<std::string>(j, "algo", "adam");
  if (algo == "sgd")
    c.algo = OptAlgo::sgd;
  else if (algo == "adam")
    c.algo = OptAlgo::adam;
  else
    throw ConfigError("config: unknown optimizer '" + algo + "'");
  c.lr = detail::get_or(j, "lr", c.lr);
  c.beta1 = detail::get_or(j, "beta1", c.beta1);
  c.beta2 = detail::get_or(j, "beta2", c.beta2);
  c.eps = detail::get_or(j, "eps", c.eps);
  if (c.lr <= 0.0) throw ConfigError("config: optimizer lr must be > 0");
  return c;
}

inline json run_config_to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["dataset"] = {{"kind", c.dataset.kind},
                  {"dir", c.dataset.dir},
                  {"train_subset", c.dataset.train_subset},
                  {"val_size", c.dataset.val_size},
                  {"classes", c.dataset.classes},
                  {"samples_per_class", c.dataset.samples_per_class},
                  {"dim", c.dataset.dim},
                  {"spacing", c.dataset.spacing}};
  j["architecture"] = c.architecture;
  j["pretrain"] = {{"epochs", c.pretrain.epochs},
                   {"batch_size", c.pretrain.batch_size},
                   {"optimizer", optimizer_to_json(c.pretrain.optimizer)}};
  j["quantize"] = {
      {"mode", quant_mode_name(c.quantize.mode)},
      {"exclude", c.quantize.exclude},
      {"admm",
       {{"epochs_per_w_update", c.quantize.admm.epochs_per_w_update},
        {"max_iterations", c.quantize.admm.max_iterations},
        {"tolerance", c.quantize.admm.tolerance},
        {"batch_size", c.quantize.admm.batch_size},
        {"optimizer", optimizer_to_json(c.quantize.admm.optimizer)},
        {"rho",
         {{"initial", c.quantize.admm.rho.initial},
          {"growth", c.quantize.admm.rho.growth},
          {"period", c.quantize.admm.rho.period},
          {"max", c.quantize.admm.rho.max}}}}},
      {"progressive",
       {{"num_steps", c.quantize.num_steps},
        {"staging", c.quantize.staging},
        {"rho_reset_per_step", c.quantize.rho_reset_per_step}}}};
  return j;
}

inline RunConfig parse_run_config(const json& j) {
  detail::check_keys(j, "(root)",
                     {"seed", "out_dir", "dataset", "architecture", "pretrain",
                      "quantize"});
  RunConfig c;
  c.seed = detail::get_or<std::uint64_t>(j, "seed", c.seed);
  c.out_dir = detail::get_or<std::string>(j, "out_dir", c.out_dir);

  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    detail::check_keys(d, "dataset",
                       {"kind", "dir", "train_subset", "val_size", "classes",
                        "samples_per_class", "dim", "spacing"});
    c.dataset.kind = detail::get_or<std::string>(d, "kind", c.dataset.kind);
    if (c.dataset.kind != "mnist" && c.dataset.kind != "blobs")
      throw ConfigError("config: dataset.kind must be 'mnist' or 'blobs'");
    c.dataset.dir = detail::get_or<std::string>(d, "dir", c.dataset.dir);
    c.dataset.train_subset =
        detail::get_or(d, "train_subset", c.dataset.train_subset);
    c.dataset.val_size = detail::get_or(d, "val_size", c.dataset.val_size);
    c.dataset.classes = detail::get_or(d, "classes", c.dataset.classes);
    c.dataset.samples_per_class =
        detail::get_or(d, "samples_per_class", c.dataset.samples_per_class);
    c.dataset.dim = detail::get_or(d, "dim", c.dataset.dim);
    c.dataset.spacing = detail::get_or(d, "spacing", c.dataset.spacing);
  }

  if (j.contains("architecture")) c.architecture = j.at("architecture");

  if (j.contains("pretrain")) {
    const json& p = j.at("pretrain");
    detail::check_keys(p, "pretrain", {"epochs", "batch_size", "optimizer"});
    c.pretrain.epochs = detail::get_or(p, "epochs", c.pretrain.epochs);
    c.pretrain.batch_size =
        detail::get_or(p, "batch_size", c.pretrain.batch_size);
    if (p.contains("optimizer"))
      c.pretrain.optimizer =
          optimizer_from_json(p.at("optimizer"), "pretrain.optimizer");
    if (c.pretrain.epochs < 1 || c.pretrain.batch_size < 1)
      throw ConfigError("config: pretrain counts must be >= 1");
  }

  if (j.contains("quantize")) {
    const json& q = j.at("quantize");
    detail::check_keys(q, "quantize", {"mode", "exclude", "admm", "progressive"});
    c.quantize.mode = quant_mode_from_string(
        detail::get_or<std::string>(q, "mode", "binary"));
    if (c.quantize.mode == QuantMode::excluded)
      throw ConfigError("config: quantize.mode cannot be 'excluded'");
    c.quantize.exclude =
        detail::get_or(q, "exclude", c.quantize.exclude);
    if (q.contains("admm")) {
      const json& a = q.at("admm");
      detail::check_keys(a, "quantize.admm",
                         {"epochs_per_w_update", "max_iterations", "tolerance",
                          "batch_size", "optimizer", "rho"});
      AdmmConfig& ac = c.quantize.admm;
      ac.epochs_per_w_update =
          detail::get_or(a, "epochs_per_w_update", ac.epochs_per_w_update);
      ac.max_iterations = detail::get_or(a, "max_iterations", ac.max_iterations);
      ac.tolerance = detail::get_or(a, "tolerance", ac.tolerance);
      ac.batch_size = detail::get_or(a, "batch_size", ac.batch_size);
      if (a.contains("optimizer"))
        ac.optimizer =
            optimizer_from_json(a.at("optimizer"), "quantize.admm.optimizer");
      if (a.contains("rho")) {
        const json& r = a.at("rho");
        detail::check_keys(r, "quantize.admm.rho",
                           {"initial", "growth", "period", "max"});
        ac.rho.initial = detail::get_or(r, "initial", ac.rho.initial);
        ac.rho.growth = detail::get_or(r, "growth", ac.rho.growth);
        ac.rho.period = detail::get_or(r, "period", ac.rho.period);
        ac.rho.max = detail::get_or(r, "max", ac.rho.max);
      }
      ac.validate();
    }
    if (q.contains("progressive")) {
      const json& p = q.at("progressive");
      detail::check_keys(p, "quantize.progressive",
                         {"num_steps", "staging", "rho_reset_per_step"});
      c.quantize.num_steps = detail::get_or(p, "num_steps", c.quantize.num_steps);
      c.quantize.staging = detail::get_or(p, "staging", c.quantize.staging);
      c.quantize.rho_reset_per_step =
          detail::get_or(p, "rho_reset_per_step", c.quantize.rho_reset_per_step);
      if (c.quantize.num_steps < 1)
        throw ConfigError("config: progressive.num_steps must be >= 1");
      if (!c.quantize.staging.empty() &&
          c.quantize.staging.size() !=
              static_cast<std::size_t>(c.quantize.num_steps))
        throw ConfigError(
            "config: progressive.staging length must equal num_steps");
      for (const std::string& s : c.quantize.staging)
        if (quant_mode_from_string(s) == QuantMode::excluded)
          throw ConfigError("config: staging entries cannot be 'excluded'");
    }
  }
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

// ---------------------------------------------------------------------------
// Architecture

inline json architecture_to_json(const Model& m) {
  json layers = json::array();
  for (const Layer& l : m.layers) {
    json e{{"kind", layer_kind_name(l.kind)}, {"name", l.name}};
    switch (l.kind) {
      case LayerKind::dense:
        e["out_features"] = l.out_features;
        break;
      case LayerKind::conv2d:
        e["out_channels"] = l.out_channels;
        e["kernel"] = l.kernel;
        e["stride"] = l.stride;
        e["padding"] = l.padding;
        break;
      case LayerKind::maxpool2d:
        e["pool"] = l.pool;
        e["stride"] = l.pool_stride;
        break;
      default:
        break;
    }
    layers.push_back(std::move(e));
  }
  return json{{"input_shape", m.input_shape}, {"layers", layers}};
}

// Builds a model from the architecture JSON: either a preset name ("lenet5")
// or {input_shape, layers:[{kind, ...}]} with fan-ins inferred by shape
// propagation. Missing names are derived from the kind (conv1, fc2, ...).
inline Model build_model(const json& arch) {
  if (arch.is_string()) {
    std::string preset = arch.get<std::string>();
    if (preset == "lenet5") return lenet5();
    throw ConfigError("config: unknown architecture preset '" + preset + "'");
  }
  detail::check_keys(arch, "architecture", {"input_shape", "layers"});
  if (!arch.contains("input_shape") || !arch.contains("layers"))
    throw ConfigError("config: architecture needs input_shape and layers");
  Model m;
  m.input_shape = arch.at("input_shape").get<Shape>();
  Shape s = m.input_shape;
  int n_conv = 0, n_fc = 0, n_pool = 0, n_relu = 0, n_flat = 0;
  for (const json& e : arch.at("layers")) {
    detail::check_keys(e, "architecture.layers[]",
                       {"kind", "name", "out_features", "out_channels",
                        "kernel", "stride", "padding", "pool"});
    std::string kind = e.at("kind").get<std::string>();
    Layer l;
    if (kind == "conv2d") {
      if (s.size() != 3)
        throw ConfigError("config: conv2d expects [C,H,W] input, got " +
                          shape_str(s));
      l = make_conv2d(detail::get_or<std::string>(
                          e, "name", "conv" + std::to_string(++n_conv)),
                      s[0], e.at("out_channels").get<std::size_t>(),
                      e.at("kernel").get<std::size_t>(),
                      detail::get_or<std::size_t>(e, "stride", 1),
                      detail::get_or<std::size_t>(e, "padding", 0));
    } else if (kind == "dense") {
      if (s.size() != 1)
        throw ConfigError(
            "config: dense expects flattened input, got " + shape_str(s) +
            " (insert a flatten layer)");
      l = make_dense(detail::get_or<std::string>(
                         e, "name", "fc" + std::to_string(++n_fc)),
                     s[0], e.at("out_features").get<std::size_t>());
    } else if (kind == "maxpool2d") {
      l = make_maxpool2d(detail::get_or<std::string>(
                             e, "name", "pool" + std::to_string(++n_pool)),
                         e.at("pool").get<std::size_t>(),
                         detail::get_or<std::size_t>(e, "stride", 0));
    } else if (kind == "relu") {
      l = make_relu(detail::get_or<std::string>(
          e, "name", "relu" + std::to_string(++n_relu)));
    } else if (kind == "flatten") {
      l = make_flatten(detail::get_or<std::string>(
          e, "name", "flatten" + std::to_string(++n_flat)));
    } else {
      throw ConfigError("config: unknown layer kind '" + kind + "'");
    }
    s = layer_output_shape(l, s);
    m.layers.push_back(std::move(l));
  }
  validate_model(m);
  return m;
}

// ---------------------------------------------------------------------------
// Dataset assembly

struct LoadedData {
  DataSplit split;  // train + validation
  Dataset test;
};

inline std::string idx_path(const std::string& dir, const std::string& base) {
  namespace fs = std::filesystem;
  std::string plain = dir + "/" + base;
  if (fs::exists(plain)) return plain;
  if (fs::exists(plain + ".gz")) return plain + ".gz";
  throw DataError("dataset file '" + plain + "[.gz]' not found");
}

inline LoadedData load_dataset(const DatasetConfig& cfg, std::uint64_t seed) {
  LoadedData out;
  if (cfg.kind == "mnist") {
    Dataset train = load_idx(idx_path(cfg.dir, "train-images-idx3-ubyte"),
                             idx_path(cfg.dir, "train-labels-idx1-ubyte"));
    out.test = load_idx(idx_path(cfg.dir, "t10k-images-idx3-ubyte"),
                        idx_path(cfg.dir, "t10k-labels-idx1-ubyte"));
    out.test.split = "test";
    out.split = split_train_val(train, cfg.val_size, seed);
    if (cfg.train_subset > 0 && cfg.train_subset < out.split.train.size()) {
      out.split.train = subset(out.split.train, cfg.train_subset, seed);
      out.split.train.split = "train";
    }
  } else if (cfg.kind == "blobs") {
    int val_per_class = std::max(1, cfg.samples_per_class / 4);
    out.split.train = synth_blobs(cfg.classes, cfg.samples_per_class, cfg.dim,
                                  mix_seed(seed, 1), cfg.spacing);
    out.split.train.split = "train";
    out.split.val = synth_blobs(cfg.classes, val_per_class, cfg.dim,
                                mix_seed(seed, 2), cfg.spacing);
    out.split.val.split = "val";
    out.test = synth_blobs(cfg.classes, val_per_class, cfg.dim,
                           mix_seed(seed, 3), cfg.spacing);
    out.test.split = "test";
  } else {
    throw ConfigError("config: dataset.kind must be 'mnist' or 'blobs'");
  }
  return out;
}

}  // namespace admmq
