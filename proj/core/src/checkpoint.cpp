#include "yftag/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "yftag/error.hpp"

namespace yftag::ckpt {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written in host byte order");

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'Y', 'F', 'T', 'A', 'G', 'C', 'K', '\0'};

json to_json(const arch::Geometry& g) {
  return {{"height", g.height}, {"width", g.width}, {"channels", g.channels}};
}

json to_json(const HeadConfig& h) {
  return {{"spp_levels", h.spp_levels},
          {"hidden_fc_widths", h.hidden_fc_widths},
          {"dropout_rate", h.dropout_rate},
          {"num_classes", h.num_classes}};
}

json to_json(const net::TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"base_lr", c.base_lr},
          {"lr_decay_factor", c.lr_decay_factor},
          {"lr_decay_every", c.lr_decay_every},
          {"total_epochs", c.total_epochs},
          {"momentum", c.momentum},
          {"weight_decay", c.weight_decay},
          {"seed", c.seed}};
}

template <typename T>
void write_le(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_le(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw Error("checkpoint: truncated file");
  return v;
}

Header parse_header(const json& j, std::uint32_t version) {
  Header h;
  h.version = version;
  h.arch = j.at("arch").get<std::string>();
  const auto& in = j.at("input");
  h.input = {in.at("height").get<int>(), in.at("width").get<int>(),
             in.at("channels").get<int>()};
  const auto& hd = j.at("head");
  h.head.spp_levels = hd.at("spp_levels").get<std::vector<int>>();
  h.head.hidden_fc_widths = hd.at("hidden_fc_widths").get<std::vector<int>>();
  h.head.dropout_rate = hd.at("dropout_rate").get<double>();
  h.head.num_classes = hd.at("num_classes").get<int>();
  const auto& tc = j.at("train");
  auto& c = h.state.config;
  c.batch_size = tc.at("batch_size").get<int>();
  c.base_lr = tc.at("base_lr").get<double>();
  c.lr_decay_factor = tc.at("lr_decay_factor").get<double>();
  c.lr_decay_every = tc.at("lr_decay_every").get<int>();
  c.total_epochs = tc.at("total_epochs").get<int>();
  c.momentum = tc.at("momentum").get<double>();
  c.weight_decay = tc.at("weight_decay").get<double>();
  c.seed = tc.at("seed").get<std::uint64_t>();
  const auto& ac = j.at("augment");
  h.state.augment.base_size = ac.at("base_size").get<int>();
  h.state.augment.crop_size = ac.at("crop_size").get<int>();
  h.state.epoch = j.at("epoch").get<int>();
  h.state.rng_state = j.at("rng_state").get<std::string>();
  for (const auto& t : j.at("tensors")) {
    h.tensors.push_back({t.at("name").get<std::string>(),
                         t.at("shape").get<Shape>(),
                         t.at("offset").get<std::uint64_t>(),
                         t.at("count").get<std::uint64_t>()});
  }
  return h;
}

Header read_header(std::istream& is, const std::string& path) {
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw Error(path + " is not a yftag checkpoint");
  }
  const auto version = read_le<std::uint32_t>(is);
  if (version > kFormatVersion) {
    throw Error(path + ": checkpoint format " + std::to_string(version) +
                " is newer than supported " + std::to_string(kFormatVersion));
  }
  const auto length = read_le<std::uint64_t>(is);
  std::string text(length, '\0');
  is.read(text.data(), std::streamsize(length));
  if (!is) throw Error(path + ": truncated checkpoint header");
  try {
    return parse_header(json::parse(text), version);
  } catch (const json::exception& e) {
    throw Error(path + ": bad checkpoint header: " + e.what());
  }
}

}  // namespace

void save(const std::string& path, net::Network& network,
          const TrainingState& state) {
  const auto& plan = network.plan();
  json j;
  j["arch"] = arch::render_arch_file(plan.spec);
  j["input"] = to_json(plan.input);
  j["head"] = to_json(plan.head);
  j["train"] = to_json(state.config);
  j["augment"] = {{"base_size", state.augment.base_size},
                  {"crop_size", state.augment.crop_size}};
  j["epoch"] = state.epoch;
  j["rng_state"] = state.rng_state;
  auto tensors = network.state_tensors();
  json dir = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    dir.push_back({{"name", name},
                   {"shape", t->shape()},
                   {"offset", offset},
                   {"count", t->size()}});
    offset += t->size() * sizeof(float);
  }
  j["tensors"] = dir;
  const std::string text = j.dump(1);

  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write checkpoint " + path);
    os.write(kMagic, sizeof kMagic);
    write_le<std::uint32_t>(os, kFormatVersion);
    write_le<std::uint64_t>(os, text.size());
    os.write(text.data(), std::streamsize(text.size()));
    for (const auto& [name, t] : tensors) {
      os.write(reinterpret_cast<const char*>(t->raw()),
               std::streamsize(t->size() * sizeof(float)));
    }
    if (!os) throw Error("failed writing checkpoint " + path);
  }
  std::filesystem::rename(tmp, path);
}

Header read_header(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw NotFoundError("cannot open checkpoint " + path);
  return read_header(is, path);
}

Loaded load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw NotFoundError("cannot open checkpoint " + path);
  Header h = read_header(is, path);
  const auto payload_start = is.tellg();
  auto plan = arch::expand_layers(arch::parse_arch_file(h.arch), h.input, h.head);
  net::Network network(std::move(plan), 0);
  auto tensors = network.state_tensors();
  if (tensors.size() != h.tensors.size()) {
    throw Error(path + ": checkpoint holds " + std::to_string(h.tensors.size()) +
                " tensors, network expects " + std::to_string(tensors.size()));
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& entry = h.tensors[i];
    Tensor& t = *tensors[i].second;
    if (entry.name != tensors[i].first || entry.shape != t.shape() ||
        entry.count != t.size()) {
      throw Error(path + ": tensor '" + entry.name + "' " +
                  shape_string(entry.shape) + " does not match network tensor '" +
                  tensors[i].first + "' " + shape_string(t.shape()));
    }
    is.seekg(payload_start + std::streamoff(entry.offset));
    is.read(reinterpret_cast<char*>(t.raw()),
            std::streamsize(entry.count * sizeof(float)));
    if (!is) throw Error(path + ": truncated tensor '" + entry.name + "'");
  }
  return {std::move(network), h.state};
}

}  // namespace yftag::ckpt
