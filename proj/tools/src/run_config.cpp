#include "snn/cli/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "snn/encoding.hpp"
#include "snn/error.hpp"

namespace snn::cli {

using nlohmann::json;

std::size_t RunConfig::resolved_jobs() const {
  if (jobs > 0) return jobs;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::filesystem::path RunConfig::checkpoint_path() const {
  return perturb.checkpoint.empty() ? out / "checkpoint" : perturb.checkpoint;
}

std::uint64_t RunConfig::component_seed(std::uint64_t which) const {
  return derive_seed(seed, which);
}

void RunConfig::validate() const {
  if (dataset.name != "mnist" && dataset.name != "cifar10" && dataset.name != "synthetic") {
    throw ConfigError("unknown dataset '" + dataset.name + "' (expected mnist, cifar10 or synthetic)");
  }
  if (dataset.name != "synthetic" && dataset.path.empty()) {
    throw ConfigError("dataset.path is required for " + dataset.name);
  }
  if (t_steps == 0) throw ConfigError("timesteps must be positive");
  if (out.empty()) throw ConfigError("output directory is empty");
  try {
    lif.validate();
    train.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  if (eval.batch_size == 0) throw ConfigError("eval.batch_size must be positive");
  if (perturb.samples == 0) throw ConfigError("perturb.samples must be positive");
}

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw ConfigError("unknown config key '" + where + "." + key + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, RunConfig cfg) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    check_keys(root, "config",
               {"out", "seed", "jobs", "dataset", "network", "neuron", "timesteps", "train", "eval",
                "sweep", "perturb"});
    if (root.contains("out")) cfg.out = root["out"].get<std::string>();
    read(root, "seed", cfg.seed);
    read(root, "jobs", cfg.jobs);
    read(root, "timesteps", cfg.t_steps);

    if (root.contains("dataset")) {
      const json& d = root["dataset"];
      check_keys(d, "dataset", {"name", "path", "train_samples", "test_samples", "stratified", "synthetic"});
      read(d, "name", cfg.dataset.name);
      if (d.contains("path")) cfg.dataset.path = d["path"].get<std::string>();
      read(d, "train_samples", cfg.dataset.train_samples);
      read(d, "test_samples", cfg.dataset.test_samples);
      read(d, "stratified", cfg.dataset.stratified);
      if (d.contains("synthetic")) {
        const json& s = d["synthetic"];
        check_keys(s, "dataset.synthetic",
                   {"classes", "train_per_class", "test_per_class", "separation", "geometry"});
        read(s, "classes", cfg.dataset.synthetic_classes);
        read(s, "train_per_class", cfg.dataset.synthetic_train_per_class);
        read(s, "test_per_class", cfg.dataset.synthetic_test_per_class);
        read(s, "separation", cfg.dataset.synthetic_separation);
        read(s, "geometry", cfg.dataset.synthetic_geometry);
      }
    }

    if (root.contains("network")) {
      const json& n = root["network"];
      check_keys(n, "network",
                 {"arch", "mlp_hidden", "conv_channels", "kernel", "stride", "padding", "cnn_hidden", "bias"});
      if (n.contains("arch")) cfg.arch.arch = arch_from_string(n["arch"].get<std::string>());
      read(n, "mlp_hidden", cfg.arch.mlp_hidden);
      read(n, "conv_channels", cfg.arch.conv_channels);
      read(n, "kernel", cfg.arch.kernel);
      read(n, "stride", cfg.arch.stride);
      read(n, "padding", cfg.arch.padding);
      read(n, "cnn_hidden", cfg.arch.cnn_hidden);
      read(n, "bias", cfg.arch.bias);
    }

    if (root.contains("neuron")) {
      const json& n = root["neuron"];
      check_keys(n, "neuron", {"tau", "v_th", "v_reset", "surrogate", "alpha", "grad_through_reset"});
      read(n, "tau", cfg.lif.tau);
      read(n, "v_th", cfg.lif.v_th);
      read(n, "v_reset", cfg.lif.v_reset);
      if (n.contains("surrogate")) {
        cfg.lif.surrogate = surrogate_from_string(n["surrogate"].get<std::string>());
        cfg.lif.alpha = default_alpha(cfg.lif.surrogate);
      }
      read(n, "alpha", cfg.lif.alpha);
      read(n, "grad_through_reset", cfg.lif.grad_through_reset);
    }

    if (root.contains("train")) {
      const json& t = root["train"];
      check_keys(t, "train",
                 {"loss", "lr", "batch_size", "max_epochs", "patience", "val_fraction", "encoding"});
      if (t.contains("loss")) cfg.train.loss = loss_from_string(t["loss"].get<std::string>());
      read(t, "lr", cfg.train.lr);
      read(t, "batch_size", cfg.train.batch_size);
      read(t, "max_epochs", cfg.train.max_epochs);
      read(t, "patience", cfg.train.patience);
      read(t, "val_fraction", cfg.train.val_fraction);
      if (t.contains("encoding")) cfg.train.encoding = encoding_from_string(t["encoding"].get<std::string>());
    }

    if (root.contains("eval")) {
      const json& e = root["eval"];
      check_keys(e, "eval", {"encoding", "batch_size"});
      if (e.contains("encoding")) cfg.eval.encoding = encoding_from_string(e["encoding"].get<std::string>());
      read(e, "batch_size", cfg.eval.batch_size);
    }

    if (root.contains("sweep")) {
      const json& s = root["sweep"];
      check_keys(s, "sweep", {"tau", "v_th"});
      read(s, "tau", cfg.sweep.tau);
      read(s, "v_th", cfg.sweep.v_th);
    }

    if (root.contains("perturb")) {
      const json& p = root["perturb"];
      check_keys(p, "perturb", {"checkpoint", "samples", "threshold", "max_corr_neurons"});
      if (p.contains("checkpoint")) cfg.perturb.checkpoint = p["checkpoint"].get<std::string>();
      read(p, "samples", cfg.perturb.samples);
      read(p, "threshold", cfg.perturb.threshold);
      read(p, "max_corr_neurons", cfg.perturb.max_corr_neurons);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), std::move(base));
}

std::string dump_run_config(const RunConfig& c) {
  json j;
  j["out"] = c.out.string();
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  j["timesteps"] = c.t_steps;
  j["dataset"] = {{"name", c.dataset.name},
                  {"path", c.dataset.path.string()},
                  {"train_samples", c.dataset.train_samples},
                  {"test_samples", c.dataset.test_samples},
                  {"stratified", c.dataset.stratified},
                  {"synthetic",
                   {{"classes", c.dataset.synthetic_classes},
                    {"train_per_class", c.dataset.synthetic_train_per_class},
                    {"test_per_class", c.dataset.synthetic_test_per_class},
                    {"separation", c.dataset.synthetic_separation},
                    {"geometry", c.dataset.synthetic_geometry}}}};
  j["network"] = {{"arch", to_string(c.arch.arch)},
                  {"mlp_hidden", c.arch.mlp_hidden},
                  {"conv_channels", c.arch.conv_channels},
                  {"kernel", c.arch.kernel},
                  {"stride", c.arch.stride},
                  {"padding", c.arch.padding},
                  {"cnn_hidden", c.arch.cnn_hidden},
                  {"bias", c.arch.bias}};
  j["neuron"] = {{"tau", c.lif.tau},
                 {"v_th", c.lif.v_th},
                 {"v_reset", c.lif.v_reset},
                 {"surrogate", to_string(c.lif.surrogate)},
                 {"alpha", c.lif.alpha},
                 {"grad_through_reset", c.lif.grad_through_reset}};
  j["train"] = {{"loss", to_string(c.train.loss)},
                {"lr", c.train.lr},
                {"batch_size", c.train.batch_size},
                {"max_epochs", c.train.max_epochs},
                {"patience", c.train.patience},
                {"val_fraction", c.train.val_fraction},
                {"encoding", to_string(c.train.encoding)}};
  j["eval"] = {{"encoding", to_string(c.eval.encoding)}, {"batch_size", c.eval.batch_size}};
  j["sweep"] = {{"tau", c.sweep.tau}, {"v_th", c.sweep.v_th}};
  j["perturb"] = {{"checkpoint", c.perturb.checkpoint.string()},
                  {"samples", c.perturb.samples},
                  {"threshold", c.perturb.threshold},
                  {"max_corr_neurons", c.perturb.max_corr_neurons}};
  return j.dump(2) + "\n";
}

namespace {

Dataset maybe_subsample(const Dataset& d, std::size_t n, std::uint64_t seed, bool stratified) {
  if (n == 0 || n == d.size()) return d;
  if (n > d.size()) {
    throw ConfigError("requested " + std::to_string(n) + " samples from " + d.name + " which has " +
                      std::to_string(d.size()));
  }
  return subsample(d, n, seed, stratified);
}

void require_file(const std::filesystem::path& p) {
  if (!std::filesystem::is_regular_file(p)) throw ConfigError("missing dataset file " + p.string());
}

}  // namespace

LoadedData load_data(RunConfig& cfg) {
  LoadedData data;
  const auto& dc = cfg.dataset;
  if (dc.name == "mnist") {
    const std::filesystem::path files[] = {dc.path / "train-images-idx3-ubyte", dc.path / "train-labels-idx1-ubyte",
                                           dc.path / "t10k-images-idx3-ubyte", dc.path / "t10k-labels-idx1-ubyte"};
    for (const auto& f : files) require_file(f);
    data.train = load_idx(files[0], files[1]);
    data.test = load_idx(files[2], files[3]);
  } else if (dc.name == "cifar10") {
    std::vector<std::filesystem::path> train_files;
    for (int i = 1; i <= 5; ++i) {
      train_files.push_back(dc.path / ("data_batch_" + std::to_string(i) + ".bin"));
      require_file(train_files.back());
    }
    const std::filesystem::path test_file = dc.path / "test_batch.bin";
    require_file(test_file);
    data.train = load_cifar10_binary(train_files);
    data.test = load_cifar10_binary(std::span(&test_file, 1));
  } else {
    if (dc.synthetic_separation <= 0.0) throw ConfigError("synthetic separation must be positive");
    const std::uint64_t s = cfg.component_seed(seed_subsample);
    data.train = synthetic_rates(dc.synthetic_classes, dc.synthetic_train_per_class, dc.synthetic_geometry,
                                 dc.synthetic_separation, derive_seed(s, 1));
    data.test = synthetic_rates(dc.synthetic_classes, dc.synthetic_test_per_class, dc.synthetic_geometry,
                                dc.synthetic_separation, derive_seed(s, 2));
  }
  const std::uint64_t s = cfg.component_seed(seed_subsample);
  data.train = maybe_subsample(data.train, dc.train_samples, derive_seed(s, 3), dc.stratified);
  data.test = maybe_subsample(data.test, dc.test_samples, derive_seed(s, 4), dc.stratified);

  cfg.arch.input_shape = data.train.sample_shape();
  cfg.arch.classes = data.train.classes;
  if (cfg.arch.arch == Arch::cnnsnn && cfg.arch.input_shape.size() != 3) {
    throw ConfigError("cnnsnn needs [c, h, w] samples, dataset gives " + shape_to_string(cfg.arch.input_shape));
  }
  return data;
}

}  // namespace snn::cli
