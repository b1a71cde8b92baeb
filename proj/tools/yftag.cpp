// yftag: command-line entry point over the core library.
//
// Every subcommand writes manifest.json (command, arguments, resolved
// configuration, seed, version) into its run directory.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "yftag/arch.hpp"
#include "yftag/calib.hpp"
#include "yftag/calib_server.hpp"
#include "yftag/checkpoint.hpp"
#include "yftag/complexity.hpp"
#include "yftag/dataset.hpp"
#include "yftag/error.hpp"
#include "yftag/eval.hpp"
#include "yftag/multilabel.hpp"
#include "yftag/network.hpp"
#include "yftag/shapes.hpp"
#include "yftag/tagselect.hpp"
#include "yftag/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace yftag;

namespace {

constexpr int kConfigVersion = 1;

// Relative corpus paths fall back to $YFTAG_DATA_ROOT when they do not
// exist as given.
std::string corpus_path(const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute() || fs::exists(path)) {
    return path;
  }
  if (const char* root = std::getenv("YFTAG_DATA_ROOT")) {
    fs::path p = fs::path(root) / path;
    if (fs::exists(p)) return p.string();
  }
  return path;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

struct Run {
  std::string command;
  std::vector<std::string> args;
  fs::path dir;
  json config = json::object();
  std::optional<std::uint64_t> seed;

  void write_manifest() const {
    json m;
    m["tool"] = "yftag";
    m["version"] = YFTAG_VERSION;
    m["config_version"] = kConfigVersion;
    m["command"] = command;
    m["args"] = args;
    m["seed"] = seed ? json(*seed) : json(nullptr);
    m["config"] = config;
    write_file(dir / "manifest.json", m.dump(2) + "\n");
  }
};

// ---------------------------------------------------------------------------
// ArchSpec <-> JSON, the machine-readable form of `arch parse`.

json filter_json(const arch::FilterShape& f) {
  if (auto* s = std::get_if<arch::SquareFilter>(&f)) {
    return {{"square", s->size}};
  }
  const auto& g = std::get<arch::FactoredFilter>(f);
  return {{"factored", {g.first_h, g.first_w, g.second_h, g.second_w}}};
}

json spec_json(const arch::ArchSpec& spec) {
  json stages = json::array();
  for (const auto& stage : spec.stages) {
    json blocks = json::array();
    for (const auto& block : stage) {
      if (auto* c = std::get_if<arch::ConvBlock>(&block)) {
        blocks.push_back({{"conv", filter_json(c->filter)},
                          {"channels", c->channels},
                          {"stride", c->stride},
                          {"repeat", c->repeat}});
      } else {
        const auto& p = std::get<arch::PoolBlock>(block);
        blocks.push_back({{"pool", p.window}, {"stride", p.stride}});
      }
    }
    stages.push_back(blocks);
  }
  return {{"name", spec.name}, {"stages", stages}};
}

arch::ArchSpec spec_from_json(const json& j) {
  arch::ArchSpec spec;
  spec.name = j.at("name").get<std::string>();
  for (const auto& stage : j.at("stages")) {
    arch::Stage s;
    for (const auto& b : stage) {
      if (b.contains("pool")) {
        s.push_back(arch::PoolBlock{b.at("pool").get<int>(),
                                    b.at("stride").get<int>()});
        continue;
      }
      arch::ConvBlock c;
      const auto& f = b.at("conv");
      if (f.contains("square")) {
        c.filter = arch::SquareFilter{f.at("square").get<int>()};
      } else {
        const auto& d = f.at("factored");
        c.filter = arch::FactoredFilter{d.at(0).get<int>(), d.at(1).get<int>(),
                                        d.at(2).get<int>(), d.at(3).get<int>()};
      }
      c.channels = b.at("channels").get<int>();
      c.stride = b.value("stride", 1);
      c.repeat = b.value("repeat", 1);
      s.push_back(c);
    }
    spec.stages.push_back(std::move(s));
  }
  arch::validate(spec);
  return spec;
}

// An .arch file, or the JSON written by `arch parse`.
arch::ArchSpec load_spec(const std::string& path) {
  const std::string text = read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    return spec_from_json(json::parse(text));
  }
  return arch::parse_arch_file(text);
}

HeadConfig head_from_json(const json& j, HeadConfig head) {
  if (j.contains("spp_levels")) {
    head.spp_levels = j.at("spp_levels").get<std::vector<int>>();
  }
  if (j.contains("hidden")) {
    head.hidden_fc_widths = j.at("hidden").get<std::vector<int>>();
  }
  head.dropout_rate = j.value("dropout", head.dropout_rate);
  head.num_classes = j.value("classes", head.num_classes);
  return head;
}

json head_json(const HeadConfig& h) {
  return {{"spp_levels", h.spp_levels},
          {"hidden", h.hidden_fc_widths},
          {"dropout", h.dropout_rate},
          {"classes", h.num_classes}};
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const int v = std::stoi(item, &used);
    if (used != item.size()) throw Error("bad integer list '" + text + "'");
    out.push_back(v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// arch

struct ArchOptions {
  std::string file;
  std::string input = "221x221x3";
  int classes = 1000;
  std::string hidden = "4096,4096";
};

void cmd_arch_parse(Run& run, const ArchOptions& o) {
  const auto spec = load_spec(o.file);
  const std::string text = spec_json(spec).dump(2) + "\n";
  write_file(run.dir / "arch.json", text);
  std::cout << text;
}

void cmd_arch_render(Run& run, const ArchOptions& o) {
  const std::string text = arch::render_arch_file(load_spec(o.file));
  write_file(run.dir / "arch.txt", text);
  std::cout << text;
}

void cmd_arch_expand(Run& run, const ArchOptions& o) {
  HeadConfig head;
  head.num_classes = o.classes;
  head.hidden_fc_widths = parse_int_list(o.hidden);
  const auto plan = arch::expand_layers(load_spec(o.file),
                                        arch::parse_geometry(o.input), head);
  std::ostringstream out;
  out << "index,stage,kind,in_channels,out_channels,filter_h,filter_w,stride,"
         "pad_top,pad_bottom,pad_left,pad_right,in_h,in_w,out_h,out_w\n";
  for (std::size_t i = 0; i < plan.layers.size(); ++i) {
    const auto& l = plan.layers[i];
    out << i << ',' << l.stage << ',' << arch::to_string(l.kind) << ','
        << l.in_channels << ',' << l.out_channels << ',' << l.filter_h << ','
        << l.filter_w << ',' << l.stride << ',' << l.padding.top << ','
        << l.padding.bottom << ',' << l.padding.left << ','
        << l.padding.right << ',' << l.in_h << ',' << l.in_w << ','
        << l.out_h << ',' << l.out_w << '\n';
  }
  run.config["input"] = o.input;
  run.config["head"] = head_json(head);
  write_file(run.dir / "layers.csv", out.str());
  std::cout << out.str();
}

// ---------------------------------------------------------------------------
// complexity

struct ComplexityOptions {
  std::vector<std::string> arch;
  std::string input = "221x221x3";
  int classes = 1000;
  std::string hidden = "4096,4096";
  std::string report = "table";
};

void cmd_complexity(Run& run, const ComplexityOptions& o) {
  HeadConfig head;
  head.num_classes = o.classes;
  head.hidden_fc_widths = parse_int_list(o.hidden);
  const auto input = arch::parse_geometry(o.input);
  run.config["input"] = o.input;
  run.config["head"] = head_json(head);
  run.config["arch"] = o.arch;
  if (o.arch.size() == 1) {
    const auto plan = arch::expand_layers(load_spec(o.arch[0]), input, head);
    const auto report = complexity::count_complexity(plan);
    const std::string csv = complexity::to_csv(report);
    write_file(run.dir / "complexity.csv", csv);
    std::cout << (o.report == "csv" ? csv : complexity::to_table(report, plan));
    return;
  }
  std::vector<arch::ArchSpec> specs;
  for (const auto& path : o.arch) specs.push_back(load_spec(path));
  const auto ranked = complexity::compare_architectures(specs, input, head);
  std::ostringstream csv, table;
  csv << "name,ops,params\n";
  table << "name          ops(M)     params(M)\n";
  for (const auto& r : ranked) {
    csv << r.name << ',' << r.total_ops << ',' << r.total_params << '\n';
    char line[128];
    std::snprintf(line, sizeof line, "%-12s %9.1f %11.2f\n", r.name.c_str(),
                  r.total_ops / 1e6, r.total_params / 1e6);
    table << line;
  }
  write_file(run.dir / "comparison.csv", csv.str());
  std::cout << (o.report == "csv" ? csv.str() : table.str());
}

// ---------------------------------------------------------------------------
// tags

struct TagOptions {
  std::string metadata;
  std::string key = "photo";
  std::size_t n = 100;
  std::string rules;
  std::string vocab;
  std::size_t k = 1000;
  std::string exclude;
  double w_title = 0.5, w_description = 0.25, w_tags = 1.0;
};

tags::RankKey rank_key(const std::string& key) {
  if (key == "photo") return tags::RankKey::photo_count;
  if (key == "user") return tags::RankKey::user_count;
  throw Error("--key must be photo or user");
}

tags::IngestResult ingest(Run& run, const TagOptions& o) {
  auto result = tags::ingest_metadata_file(corpus_path(o.metadata));
  run.config["metadata"] = o.metadata;
  run.config["lines"] = result.lines;
  run.config["records"] = result.records.size();
  run.config["malformed"] = result.malformed;
  if (result.malformed > 0) {
    std::cerr << "yftag: skipped " << result.malformed
              << " malformed metadata line(s)\n";
  }
  return result;
}

void cmd_tags_stats(Run& run, const TagOptions& o) {
  const auto in = ingest(run, o);
  const auto stats = tags::compute_tag_stats(in.records);
  std::ostringstream out;
  out << "tag\tphoto_count\tuser_count\n";
  for (const auto& [tag, c] : stats) {
    out << tag << '\t' << c.photo_count << '\t' << c.user_count << '\n';
  }
  write_file(run.dir / "stats.tsv", out.str());
  std::cout << out.str();
}

void cmd_tags_rank(Run& run, const TagOptions& o) {
  const auto in = ingest(run, o);
  const auto ranked =
      tags::rank_tags(tags::compute_tag_stats(in.records), rank_key(o.key), o.n);
  run.config["key"] = o.key;
  run.config["n"] = o.n;
  std::ostringstream out;
  out << "rank\ttag\tphoto_count\tuser_count\n";
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    out << i + 1 << '\t' << ranked[i].tag << '\t'
        << ranked[i].counts.photo_count << '\t' << ranked[i].counts.user_count
        << '\n';
  }
  write_file(run.dir / "ranking.tsv", out.str());
  std::cout << out.str();
}

void cmd_tags_select(Run& run, const TagOptions& o) {
  const auto in = ingest(run, o);
  const auto ranked =
      tags::rank_tags(tags::compute_tag_stats(in.records), rank_key(o.key), o.n);
  const auto rules = o.rules.empty() ? tags::ExclusionRules{}
                                     : tags::load_rules(corpus_path(o.rules));
  const auto vocab = tags::apply_exclusions(ranked, rules);
  run.config["key"] = o.key;
  run.config["n"] = o.n;
  run.config["rules"] = o.rules;
  run.config["number_patterns"] = rules.number_patterns;
  const fs::path out = run.dir / "vocabulary.txt";
  tags::write_vocabulary(vocab, out.string());
  std::cout << "retained " << vocab.tags.size() << " of " << ranked.size()
            << " tags -> " << out.string() << "\n";
}

void cmd_tags_build(Run& run, const TagOptions& o) {
  const auto in = ingest(run, o);
  const auto vocab = tags::read_vocabulary(corpus_path(o.vocab));
  std::set<std::string> excluded;
  if (!o.exclude.empty()) {
    std::ifstream ex(corpus_path(o.exclude));
    if (!ex) throw NotFoundError("cannot read " + o.exclude);
    excluded = eval::read_tag_list(ex);
  }
  const tags::FieldWeights weights{o.w_title, o.w_description, o.w_tags};
  const auto sets =
      tags::build_training_set(in.records, vocab, o.k, excluded, weights);
  run.config["vocab"] = o.vocab;
  run.config["k"] = o.k;
  run.config["excluded"] = excluded.size();
  run.config["weights"] = {{"title", weights.title},
                           {"description", weights.description},
                           {"tags", weights.tags}};
  std::ostringstream out;
  out << "tag\trank\tphoto_id\tscore\n";
  std::size_t shortfalls = 0;
  for (const auto& s : sets) {
    shortfalls += s.shortfall;
    for (std::size_t i = 0; i < s.photos.size(); ++i) {
      char score[32];
      std::snprintf(score, sizeof score, "%.17g", s.photos[i].second);
      out << s.tag << '\t' << i + 1 << '\t' << s.photos[i].first << '\t'
          << score << '\n';
    }
  }
  write_file(run.dir / "training_set.tsv", out.str());
  std::cout << sets.size() << " tags, " << shortfalls
            << " with fewer than k candidates -> "
            << (run.dir / "training_set.tsv").string() << "\n";
}

// ---------------------------------------------------------------------------
// train

struct TrainCli {
  std::string config;
  std::string arch;
  std::string data;
  std::string validation;
  std::string synthetic;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr;
  std::optional<int> batch;
  std::optional<double> delete_fraction;
  std::string resume;
  bool keep_all = false;
};

// The resolved training setup: config file first, then flag overrides.
struct TrainSetup {
  json arch_source;
  arch::ArchSpec spec;
  arch::Geometry input{64, 64, 3};
  HeadConfig head;
  net::TrainConfig train;
  train::AugmentConfig augment{72, 64};
  std::uint64_t init_seed = 1;
  json data;
  double delete_fraction = 0.0;
  std::uint64_t delete_seed = 5;
};

TrainSetup resolve_train(const TrainCli& o) {
  TrainSetup s;
  json cfg = json::object();
  fs::path base = fs::current_path();
  if (!o.config.empty()) {
    cfg = json::parse(read_file(o.config));
    base = fs::absolute(o.config).parent_path();
    const int version = cfg.value("version", 1);
    if (version > kConfigVersion) {
      throw Error("config version " + std::to_string(version) +
                  " is newer than this tool supports");
    }
  }
  auto rel = [&](const std::string& p) {
    if (p.empty() || fs::path(p).is_absolute()) return p;
    const fs::path local = base / p;
    return fs::exists(local) ? local.string() : corpus_path(p);
  };
  std::string arch_path = o.arch;
  if (arch_path.empty() && cfg.contains("arch")) {
    arch_path = rel(cfg["arch"].get<std::string>());
  }
  if (arch_path.empty()) throw Error("train needs --arch or an arch config entry");
  s.spec = load_spec(arch_path);
  s.arch_source = arch::render_arch_file(s.spec);
  if (cfg.contains("input")) {
    s.input = arch::parse_geometry(cfg["input"].get<std::string>());
  }
  if (cfg.contains("head")) s.head = head_from_json(cfg["head"], s.head);
  if (cfg.contains("train")) {
    const auto& t = cfg["train"];
    s.train.batch_size = t.value("batch_size", s.train.batch_size);
    s.train.base_lr = t.value("base_lr", s.train.base_lr);
    s.train.lr_decay_factor = t.value("lr_decay_factor", s.train.lr_decay_factor);
    s.train.lr_decay_every = t.value("lr_decay_every", s.train.lr_decay_every);
    s.train.total_epochs = t.value("epochs", s.train.total_epochs);
    s.train.momentum = t.value("momentum", s.train.momentum);
    s.train.weight_decay = t.value("weight_decay", s.train.weight_decay);
    s.train.seed = t.value("seed", s.train.seed);
    s.init_seed = t.value("init_seed", s.init_seed);
  }
  if (cfg.contains("augment")) {
    s.augment.base_size = cfg["augment"].value("base_size", s.augment.base_size);
    s.augment.crop_size = cfg["augment"].value("crop_size", s.augment.crop_size);
  }
  if (cfg.contains("label_deletion")) {
    s.delete_fraction = cfg["label_deletion"].value("fraction", 0.0);
    s.delete_seed = cfg["label_deletion"].value("seed", s.delete_seed);
  }
  s.data = cfg.value("data", json::object());
  for (auto key : {"train", "validation"}) {
    if (s.data.contains(key) && s.data[key].is_string()) {
      s.data[key] = rel(s.data[key].get<std::string>());
    }
  }
  if (o.epochs) s.train.total_epochs = *o.epochs;
  if (o.seed) s.train.seed = *o.seed;
  if (o.lr) s.train.base_lr = *o.lr;
  if (o.batch) s.train.batch_size = *o.batch;
  if (o.delete_fraction) s.delete_fraction = *o.delete_fraction;
  if (!o.data.empty()) s.data["train"] = corpus_path(o.data);
  if (!o.validation.empty()) s.data["validation"] = corpus_path(o.validation);
  if (!o.synthetic.empty()) {
    if (o.synthetic != "shapes") throw Error("--synthetic supports only 'shapes'");
    s.data["train"] = json{{"kind", "shapes"}, {"count", 5000}, {"seed", 11}};
    s.data["validation"] = json{{"kind", "shapes"}, {"count", 1000}, {"seed", 22}};
  }
  if (!s.data.contains("train")) {
    throw Error("train needs --data, --synthetic or a data.train config entry");
  }
  s.train.validate();
  s.augment.validate();
  if (!(s.delete_fraction >= 0 && s.delete_fraction <= 1)) {
    throw Error("label deletion fraction must be in [0, 1]");
  }
  return s;
}

data::Dataset load_source(const json& src, int size) {
  if (src.is_string()) return data::load_dataset(src.get<std::string>());
  if (src.value("kind", "") != "shapes") {
    throw Error("unknown data source " + src.dump());
  }
  data::ShapesConfig c;
  c.count = src.value("count", c.count);
  c.size = src.value("size", size);
  c.seed = src.value("seed", c.seed);
  c.min_shapes = src.value("min_shapes", c.min_shapes);
  c.max_shapes = src.value("max_shapes", c.max_shapes);
  c.min_radius = src.value("min_radius", c.min_radius);
  c.max_radius = src.value("max_radius", c.max_radius);
  return data::generate_shapes(c);
}

void cmd_train(Run& run, const TrainCli& o) {
  TrainSetup s = resolve_train(o);
  data::Dataset train_set = load_source(s.data["train"], s.augment.base_size);
  std::optional<data::Dataset> validation;
  if (s.data.contains("validation")) {
    validation = load_source(s.data["validation"], s.augment.base_size);
  }
  s.head.num_classes = train_set.num_classes();
  if (s.delete_fraction > 0) {
    const auto kept = multilabel::delete_positives(
        train_set.labels(), s.delete_fraction, s.delete_seed);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      train_set.examples[i].positives = kept[i];
    }
  }

  std::optional<net::Network> owned;
  int completed = 0;
  std::string rng_state;
  if (!o.resume.empty()) {
    auto loaded = ckpt::load(o.resume);
    owned.emplace(std::move(loaded.network));
    completed = loaded.state.epoch;
    rng_state = loaded.state.rng_state;
    if (owned->num_classes() != s.head.num_classes) {
      throw ShapeError("checkpoint has " + std::to_string(owned->num_classes()) +
                       " classes, data has " + std::to_string(s.head.num_classes));
    }
  } else {
    const auto plan = arch::expand_layers(s.spec, s.input, s.head);
    owned.emplace(net::build_network(plan, s.head, s.init_seed));
  }
  net::Network& network = *owned;

  run.seed = s.train.seed;
  run.config["arch"] = s.arch_source;
  run.config["input"] = std::to_string(s.input.height) + "x" +
                        std::to_string(s.input.width) + "x" +
                        std::to_string(s.input.channels);
  run.config["head"] = head_json(s.head);
  run.config["train"] = {{"batch_size", s.train.batch_size},
                         {"base_lr", s.train.base_lr},
                         {"lr_decay_factor", s.train.lr_decay_factor},
                         {"lr_decay_every", s.train.lr_decay_every},
                         {"epochs", s.train.total_epochs},
                         {"momentum", s.train.momentum},
                         {"weight_decay", s.train.weight_decay},
                         {"seed", s.train.seed},
                         {"init_seed", s.init_seed}};
  run.config["augment"] = {{"base_size", s.augment.base_size},
                           {"crop_size", s.augment.crop_size}};
  run.config["data"] = s.data;
  run.config["label_deletion"] = {{"fraction", s.delete_fraction},
                                  {"seed", s.delete_seed}};
  run.config["classes"] = train_set.class_names;
  run.config["positives_per_image"] =
      multilabel::mean_positives_per_item(train_set.labels());
  run.config["resume"] = o.resume;
  run.write_manifest();

  train::Trainer trainer(network, s.train, s.augment);
  if (!o.resume.empty()) trainer.restore(completed, rng_state);

  std::ofstream metrics(run.dir / "metrics.jsonl",
                        o.resume.empty() ? std::ios::trunc : std::ios::app);
  train::TrainOptions opts;
  opts.checkpoint_dir = (run.dir / "checkpoints").string();
  opts.keep_all = o.keep_all;
  opts.validation = validation ? &*validation : nullptr;
  opts.on_epoch = [&](const train::EpochMetrics& m) {
    json line = {{"epoch", m.epoch},
                 {"lr", m.lr},
                 {"train_loss", m.train_loss},
                 {"examples", m.examples},
                 {"skipped", m.skipped},
                 {"seconds", m.seconds}};
    line["validation_map"] =
        m.validation_map ? json(*m.validation_map) : json(nullptr);
    metrics << line.dump() << '\n' << std::flush;
    std::cout << line.dump() << std::endl;
  };
  trainer.run(train_set, opts);
  // Always leave a checkpoint, even when no epoch ran.
  trainer.save_checkpoint((run.dir / "checkpoints" / "last.ckpt").string());
  {
    std::ofstream classes(run.dir / "classes.txt");
    for (const auto& c : train_set.class_names) classes << c << '\n';
  }
  std::cout << "checkpoint -> " << (run.dir / "checkpoints" / "last.ckpt").string()
            << "\n";
}

// ---------------------------------------------------------------------------
// eval, score, data

struct EvalOptions {
  std::string pred, truth, tags;
};

void cmd_eval_map(Run& run, const EvalOptions& o) {
  eval::RankedPredictions preds;
  {
    std::ifstream in(corpus_path(o.pred));
    if (!in) throw NotFoundError("cannot read " + o.pred);
    eval::read_predictions(in, preds);
  }
  {
    std::ifstream in(corpus_path(o.truth));
    if (!in) throw NotFoundError("cannot read " + o.truth);
    eval::read_truth(in, preds);
  }
  std::optional<std::set<std::string>> subset;
  if (!o.tags.empty()) {
    std::ifstream in(corpus_path(o.tags));
    if (!in) throw NotFoundError("cannot read " + o.tags);
    subset = eval::read_tag_list(in);
  }
  const auto r = eval::mean_ap(preds, subset);
  run.config = {{"pred", o.pred}, {"truth", o.truth}, {"tags", o.tags}};
  json out = {{"map", r.map}, {"tags", r.per_tag.size()}, {"skipped", r.skipped},
              {"per_tag", r.per_tag}};
  write_file(run.dir / "map.json", out.dump(2) + "\n");
  char line[64];
  std::snprintf(line, sizeof line, "mAP %.6f over %zu tags", r.map,
                r.per_tag.size());
  std::cout << line;
  if (!r.skipped.empty()) std::cout << " (" << r.skipped.size() << " skipped)";
  std::cout << "\n";
}

struct ScoreOptions {
  std::string checkpoint, data, vocab;
};

void cmd_score(Run& run, const ScoreOptions& o) {
  auto loaded = ckpt::load(o.checkpoint);
  std::vector<std::string> vocab;
  if (!o.vocab.empty()) vocab = tags::read_vocabulary(corpus_path(o.vocab));
  const std::string dir = corpus_path(o.data);
  calib::ScoreResult r;
  if (fs::exists(fs::path(dir) / "labels.tsv")) {
    auto corpus = data::load_dataset(dir);
    if (vocab.empty()) vocab = corpus.class_names;
    r = calib::score_corpus(loaded.network, corpus, vocab, loaded.state.augment);
  } else {
    if (vocab.empty()) throw Error("score needs --vocab for a bare image directory");
    r = calib::score_directory(loaded.network, dir, vocab, loaded.state.augment);
  }
  run.config = {{"checkpoint", o.checkpoint}, {"data", o.data},
                {"vocab", o.vocab}, {"scored", r.scored}, {"skipped", r.skipped}};
  std::ofstream out(run.dir / "index.tsv");
  calib::write_index(out, r.index);
  if (!out) throw Error("cannot write index");
  std::cout << "scored " << r.scored << " photo(s), skipped " << r.skipped
            << " -> " << (run.dir / "index.tsv").string() << "\n";
}

struct ShapesOptions {
  data::ShapesConfig config;
};

void cmd_data_shapes(Run& run, const ShapesOptions& o) {
  const auto ds = data::generate_shapes(o.config);
  run.seed = o.config.seed;
  run.config = {{"count", o.config.count},
                {"size", o.config.size},
                {"min_shapes", o.config.min_shapes},
                {"max_shapes", o.config.max_shapes},
                {"min_radius", o.config.min_radius},
                {"max_radius", o.config.max_radius}};
  data::save_dataset(ds, (run.dir / "images").string());
  std::cout << ds.examples.size() << " images -> "
            << (run.dir / "images").string() << "\n";
}

// ---------------------------------------------------------------------------
// calibrate serve

struct ServeOptions {
  std::string index, table, judgments, photos;
  std::string host = "127.0.0.1";
  int port = 8080;
  double window = 0.05;
};

void cmd_serve(Run& run, const ServeOptions& o) {
  calib::ScoreIndex index;
  {
    std::ifstream in(corpus_path(o.index));
    if (!in) throw NotFoundError("cannot read " + o.index);
    index = calib::read_index(in);
  }
  calib::CalibrationTable table = fs::exists(o.table)
                                      ? calib::CalibrationTable::load(o.table)
                                      : calib::CalibrationTable{};
  calib::JudgmentLog log(o.judgments);
  calib::ServiceConfig config;
  config.table_path = o.table;
  config.photo_dir = corpus_path(o.photos);
  config.suggest.window = o.window;
  calib::CalibrationService service(index, table, log, config);
  calib::CalibrationServer server(service);
  const int port = server.bind(o.host, o.port);
  run.config = {{"index", o.index}, {"table", o.table},
                {"judgments", o.judgments}, {"photos", o.photos},
                {"host", o.host}, {"port", port}, {"window", o.window}};
  run.write_manifest();
  std::cout << "serving " << index.tags().size() << " tag(s) on http://"
            << o.host << ":" << port << std::endl;
  server.serve();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"yftag: architecture analysis, tag selection, training, "
               "evaluation and calibration"};
  app.require_subcommand(1);
  app.set_version_flag("--version", YFTAG_VERSION);
  Run run;
  for (int i = 1; i < argc; ++i) run.args.emplace_back(argv[i]);
  std::string run_dir;
  app.add_option("--run-dir", run_dir,
                 "Output directory (default $YFTAG_RUN_DIR or runs/<command>)");

  std::function<void()> action;
  auto bind = [&](CLI::App* sub, std::string name, auto fn) {
    sub->callback([&run, &action, name, fn] {
      run.command = name;
      action = fn;
    });
  };

  // arch
  auto* arch_cmd = app.add_subcommand("arch", "Architecture notation");
  arch_cmd->require_subcommand(1);
  ArchOptions ao;
  auto* parse = arch_cmd->add_subcommand("parse", "Parse to JSON");
  parse->add_option("file", ao.file, "Architecture file")->required();
  bind(parse, "arch parse", [&] { cmd_arch_parse(run, ao); });
  auto* render = arch_cmd->add_subcommand("render", "Canonical text");
  render->add_option("file", ao.file, "Architecture file or parsed JSON")
      ->required();
  bind(render, "arch render", [&] { cmd_arch_render(run, ao); });
  auto* expand = arch_cmd->add_subcommand("expand", "Resolved layer plan");
  expand->add_option("file", ao.file, "Architecture file")->required();
  expand->add_option("--input", ao.input, "HxWxC")->capture_default_str();
  expand->add_option("--classes", ao.classes)->capture_default_str();
  expand->add_option("--hidden", ao.hidden, "Hidden fc widths")
      ->capture_default_str();
  bind(expand, "arch expand", [&] { cmd_arch_expand(run, ao); });

  // complexity
  ComplexityOptions co;
  auto* cx = app.add_subcommand("complexity", "Count ops and params");
  cx->add_option("--arch", co.arch, "Architecture file (repeat to compare)")
      ->required();
  cx->add_option("--input", co.input, "HxWxC")->capture_default_str();
  cx->add_option("--classes", co.classes)->capture_default_str();
  cx->add_option("--hidden", co.hidden, "Hidden fc widths")
      ->capture_default_str();
  cx->add_option("--report", co.report)
      ->check(CLI::IsMember({"csv", "table"}))
      ->capture_default_str();
  bind(cx, "complexity", [&] { cmd_complexity(run, co); });

  // tags
  TagOptions to;
  auto* tg = app.add_subcommand("tags", "Tag statistics and vocabulary");
  tg->require_subcommand(1);
  auto add_meta = [&](CLI::App* sub) {
    sub->add_option("--metadata", to.metadata, "Metadata TSV")->required();
  };
  auto* stats = tg->add_subcommand("stats", "Per-tag photo and user counts");
  add_meta(stats);
  bind(stats, "tags stats", [&] { cmd_tags_stats(run, to); });
  auto* rank = tg->add_subcommand("rank", "Top-n tags by a count");
  add_meta(rank);
  rank->add_option("--key", to.key)
      ->check(CLI::IsMember({"photo", "user"}))
      ->capture_default_str();
  rank->add_option("--n", to.n)->check(CLI::PositiveNumber)->capture_default_str();
  bind(rank, "tags rank", [&] { cmd_tags_rank(run, to); });
  auto* select = tg->add_subcommand("select", "Apply exclusion rules");
  add_meta(select);
  select->add_option("--key", to.key)
      ->check(CLI::IsMember({"photo", "user"}))
      ->capture_default_str();
  select->add_option("--n", to.n)->check(CLI::PositiveNumber)->capture_default_str();
  select->add_option("--rules", to.rules, "Rules directory");
  bind(select, "tags select", [&] { cmd_tags_select(run, to); });
  auto* build = tg->add_subcommand("build", "Top-k photos per tag");
  add_meta(build);
  build->add_option("--vocab", to.vocab, "Vocabulary file")->required();
  build->add_option("--k", to.k)->check(CLI::PositiveNumber)->capture_default_str();
  build->add_option("--exclude", to.exclude, "Photo ids to exclude");
  build->add_option("--w-title", to.w_title)->capture_default_str();
  build->add_option("--w-description", to.w_description)->capture_default_str();
  build->add_option("--w-tags", to.w_tags)->capture_default_str();
  bind(build, "tags build", [&] { cmd_tags_build(run, to); });

  // train
  TrainCli tc;
  auto* tr = app.add_subcommand("train", "Train a network");
  tr->add_option("--config", tc.config, "JSON config; flags override it");
  tr->add_option("--arch", tc.arch, "Architecture file");
  auto* data_opt = tr->add_option("--data", tc.data, "Dataset directory");
  auto* synth_opt =
      tr->add_option("--synthetic", tc.synthetic, "Generated corpus: shapes");
  data_opt->excludes(synth_opt);
  tr->add_option("--validation", tc.validation, "Validation dataset directory");
  tr->add_option("--epochs", tc.epochs, "Total epochs");
  tr->add_option("--seed", tc.seed, "Training seed");
  tr->add_option("--lr", tc.lr, "Base learning rate");
  tr->add_option("--batch", tc.batch, "Batch size");
  tr->add_option("--delete-labels", tc.delete_fraction,
                 "Fraction of positive labels to delete");
  tr->add_option("--resume", tc.resume, "Checkpoint to continue from");
  tr->add_flag("--keep-all", tc.keep_all, "Keep every epoch's checkpoint");
  bind(tr, "train", [&] { cmd_train(run, tc); });

  // eval
  EvalOptions eo;
  auto* ev = app.add_subcommand("eval", "Evaluation");
  ev->require_subcommand(1);
  auto* mapc = ev->add_subcommand("map", "Mean average precision");
  mapc->add_option("--pred", eo.pred, "item<TAB>tag<TAB>score file")->required();
  mapc->add_option("--truth", eo.truth, "item<TAB>tag file")->required();
  mapc->add_option("--tags", eo.tags, "Restrict to these tags");
  bind(mapc, "eval map", [&] { cmd_eval_map(run, eo); });

  // score
  ScoreOptions so;
  auto* sc = app.add_subcommand("score", "Score a corpus into an index");
  sc->add_option("--checkpoint", so.checkpoint)->required();
  sc->add_option("--data", so.data, "Dataset or image directory")->required();
  sc->add_option("--vocab", so.vocab, "Vocabulary file");
  bind(sc, "score", [&] { cmd_score(run, so); });

  // calibrate
  ServeOptions svo;
  auto* cal = app.add_subcommand("calibrate", "Calibration service");
  cal->require_subcommand(1);
  auto* serve = cal->add_subcommand("serve", "Serve the HTTP API");
  serve->add_option("--index", svo.index, "Score index TSV")->required();
  serve->add_option("--table", svo.table, "Calibration table file")->required();
  serve->add_option("--judgments", svo.judgments, "Judgment journal")->required();
  serve->add_option("--photos", svo.photos, "Photo directory");
  serve->add_option("--host", svo.host)->capture_default_str();
  serve->add_option("--port", svo.port, "0 picks a free port")
      ->capture_default_str();
  serve->add_option("--window", svo.window, "Posterior half-width")
      ->capture_default_str();
  bind(serve, "calibrate serve", [&] { cmd_serve(run, svo); });

  // data
  ShapesOptions sho;
  auto* dt = app.add_subcommand("data", "Generated corpora");
  dt->require_subcommand(1);
  auto* shapes = dt->add_subcommand("shapes", "Synthetic shapes corpus");
  shapes->add_option("--count", sho.config.count)->capture_default_str();
  shapes->add_option("--size", sho.config.size)->capture_default_str();
  shapes->add_option("--seed", sho.config.seed)->capture_default_str();
  shapes->add_option("--min-shapes", sho.config.min_shapes)->capture_default_str();
  shapes->add_option("--max-shapes", sho.config.max_shapes)->capture_default_str();
  bind(shapes, "data shapes", [&] { cmd_data_shapes(run, sho); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (run_dir.empty()) {
      if (const char* env = std::getenv("YFTAG_RUN_DIR")) {
        run_dir = env;
      } else {
        std::string leaf = run.command;
        for (auto& ch : leaf) {
          if (ch == ' ') ch = '-';
        }
        run_dir = (fs::path("runs") / leaf).string();
      }
    }
    run.dir = run_dir;
    fs::create_directories(run.dir);
    action();
    // train and serve write theirs before the long-running part.
    if (run.command != "train" && run.command != "calibrate serve") {
      run.write_manifest();
    }
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& ch : msg) {
      if (ch == '\n') ch = ' ';
    }
    std::cerr << "yftag: error: " << msg << "\n";
    return 1;
  }
  return 0;
}
