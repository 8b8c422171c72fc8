#include "cactus/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "cactus/error.hpp"

namespace cactus {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'C', 'A', 'C', 'T', 'U', 'S', 'C', 'K'};

struct Block {
  std::string name;
  int rows = 0;
  int cols = 0;
  // Column-major source/destination; serialized row-major.
  float* data = nullptr;
};

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("checkpoint truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

void put_float(std::ostream& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

float get_float(std::istream& in) { return std::bit_cast<float>(get_u32(in)); }

void dense_blocks(const std::string& prefix, DenseNet<float>& net, std::vector<Block>& blocks) {
  float* base = net.mutable_parameters().data();
  for (int l = 0; l < net.layer_count(); ++l) {
    const int out = net.widths()[l + 1];
    const int in = net.widths()[l];
    blocks.push_back({prefix + ".W" + std::to_string(l), out, in, base + net.weight_offset(l)});
    blocks.push_back({prefix + ".b" + std::to_string(l), 1, out, base + net.bias_offset(l)});
  }
}

void adam_blocks(const std::string& prefix, AdamState<float>& opt, std::vector<Block>& blocks) {
  const int n = static_cast<int>(opt.first_moment.size());
  blocks.push_back({prefix + ".adam.m", 1, n, opt.first_moment.data()});
  blocks.push_back({prefix + ".adam.v", 1, n, opt.second_moment.data()});
}

// Mixer parameters are copied through a flat buffer because they live in four nets.
std::vector<Block> bundle_blocks(ModelBundle& m, std::vector<DenseNet<float>>& mixer_nets) {
  std::vector<Block> blocks;
  dense_blocks("actor", m.actor, blocks);
  dense_blocks("utility", m.utility, blocks);
  for (std::size_t h = 0; h < mixer_nets.size(); ++h) {
    dense_blocks("mixer.h" + std::to_string(h), mixer_nets[h], blocks);
  }
  adam_blocks("actor", m.actor_opt, blocks);
  adam_blocks("utility", m.utility_opt, blocks);
  if (m.mixer) adam_blocks("mixer", m.mixer_opt, blocks);
  return blocks;
}

json optimizer_json(const AdamState<float>& opt) {
  return {{"step", opt.step},
          {"learning_rate", opt.learning_rate},
          {"beta1", opt.beta1},
          {"beta2", opt.beta2},
          {"epsilon", opt.epsilon},
          {"size", opt.first_moment.size()}};
}

AdamState<float> optimizer_from(const json& j) {
  AdamState<float> opt = AdamState<float>::for_size(j.at("size").get<Eigen::Index>(),
                                                    j.at("learning_rate").get<double>());
  opt.step = j.at("step").get<std::int64_t>();
  opt.beta1 = j.at("beta1").get<double>();
  opt.beta2 = j.at("beta2").get<double>();
  opt.epsilon = j.at("epsilon").get<double>();
  return opt;
}

json dense_json(const DenseNet<float>& net) {
  return {{"widths", net.widths()},
          {"hidden_activation", "elu"},
          {"head", output_head_name(net.head())}};
}

DenseNet<float> dense_from(const json& j) {
  const std::string head = j.at("head").get<std::string>();
  if (head != "softmax" && head != "linear") throw FormatError("unknown output head '" + head + "'");
  if (j.at("hidden_activation").get<std::string>() != "elu") {
    throw FormatError("unsupported hidden activation");
  }
  return DenseNet<float>(j.at("widths").get<std::vector<int>>(),
                         head == "softmax" ? OutputHead::Softmax : OutputHead::Linear);
}

std::vector<DenseNet<float>> mixer_nets_of(const ModelBundle& m) {
  std::vector<DenseNet<float>> nets;
  if (m.mixer) {
    for (int h = 0; h < 4; ++h) nets.push_back(m.mixer->hypernet(h));
  }
  return nets;
}

}  // namespace

std::filesystem::path manifest_path(const std::filesystem::path& checkpoint) {
  std::filesystem::path p = checkpoint;
  p += ".manifest";
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const ModelBundle& models,
                     const CheckpointMeta& meta) {
  ModelBundle copy = models;
  std::vector<DenseNet<float>> mixer_nets = mixer_nets_of(copy);
  const std::vector<Block> blocks = bundle_blocks(copy, mixer_nets);

  json header;
  header["format"] = "cactus-checkpoint";
  header["version"] = kCheckpointVersion;
  header["epoch"] = meta.epoch;
  header["seed"] = meta.seed;
  header["critic_mode"] = critic_mode_name(models.critic_mode);
  header["curriculum"] = {{"radius", meta.curriculum.radius},
                          {"radius_cap", meta.curriculum.radius_cap},
                          {"unbounded", meta.curriculum.unbounded}};
  header["networks"]["actor"] = dense_json(models.actor);
  header["networks"]["utility"] = dense_json(models.utility);
  header["optimizers"]["actor"] = optimizer_json(models.actor_opt);
  header["optimizers"]["utility"] = optimizer_json(models.utility_opt);
  if (models.mixer) {
    const MixerShape& s = models.mixer->shape();
    header["networks"]["mixer"] = {
        {"agents", s.agents},
        {"state_size", s.state_size},
        {"embed", s.embed},
        {"hypernet_hidden", s.hypernet_hidden},
        {"mixing_activation",
         models.mixer->activation() == MixingActivation::Elu ? "elu" : "identity"}};
    header["optimizers"]["mixer"] = optimizer_json(models.mixer_opt);
  }
  json block_list = json::array();
  for (const Block& b : blocks) block_list.push_back({{"name", b.name}, {"rows", b.rows}, {"cols", b.cols}});
  header["blocks"] = block_list;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const Block& b : blocks) {
    for (int r = 0; r < b.rows; ++r) {
      for (int c = 0; c < b.cols; ++c) put_float(out, b.data[static_cast<std::size_t>(c) * b.rows + r]);
    }
  }
  if (!out) throw FormatError("failed writing checkpoint " + path.string());

  const ModelSummary s = summarize(models);
  std::ofstream manifest(manifest_path(path), std::ios::trunc);
  manifest << "format_version = " << kCheckpointVersion << "\n"
           << "epoch = " << meta.epoch << "\n"
           << "seed = " << meta.seed << "\n"
           << "critic_mode = " << critic_mode_name(models.critic_mode) << "\n"
           << "actor_parameters = " << s.actor << "\n"
           << "utility_parameters = " << s.utility << "\n"
           << "mixer_parameters = " << s.mixer << "\n"
           << "total_parameters = " << s.total() << "\n";
  if (!manifest) throw FormatError("failed writing manifest for " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw FormatError(path.string() + " is not a checkpoint");
  }
  const std::uint32_t version = get_u32(in);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t length = get_u32(in);
  std::string text(length, '\0');
  if (!in.read(text.data(), length)) throw FormatError("checkpoint header truncated");

  LoadedCheckpoint loaded;
  try {
    const json header = json::parse(text);
    ModelBundle& m = loaded.models;
    const std::string mode = header.at("critic_mode").get<std::string>();
    if (mode == "qmix") {
      m.critic_mode = CriticMode::Qmix;
    } else if (mode == "independent") {
      m.critic_mode = CriticMode::Independent;
    } else {
      throw FormatError("unknown critic mode '" + mode + "'");
    }
    m.actor = dense_from(header.at("networks").at("actor"));
    m.utility = dense_from(header.at("networks").at("utility"));
    m.actor_opt = optimizer_from(header.at("optimizers").at("actor"));
    m.utility_opt = optimizer_from(header.at("optimizers").at("utility"));
    if (m.critic_mode == CriticMode::Qmix) {
      const json& mj = header.at("networks").at("mixer");
      const MixerShape shape{mj.at("agents").get<int>(), mj.at("state_size").get<int>(),
                             mj.at("embed").get<int>(), mj.at("hypernet_hidden").get<int>()};
      const auto activation = mj.at("mixing_activation").get<std::string>() == "identity"
                                  ? MixingActivation::Identity
                                  : MixingActivation::Elu;
      m.mixer = MixerNet<float>(shape, activation);
      m.mixer_opt = optimizer_from(header.at("optimizers").at("mixer"));
    }
    if (m.actor_opt.first_moment.size() != m.actor.parameter_count() ||
        m.utility_opt.first_moment.size() != m.utility.parameter_count() ||
        (m.mixer && m.mixer_opt.first_moment.size() != m.mixer->parameter_count())) {
      throw FormatError("optimizer state does not match network size");
    }

    std::vector<DenseNet<float>> mixer_nets = mixer_nets_of(m);
    const std::vector<Block> blocks = bundle_blocks(m, mixer_nets);
    const json& listed = header.at("blocks");
    if (listed.size() != blocks.size()) throw FormatError("checkpoint block count mismatch");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const Block& b = blocks[i];
      if (listed[i].at("name").get<std::string>() != b.name ||
          listed[i].at("rows").get<int>() != b.rows || listed[i].at("cols").get<int>() != b.cols) {
        throw FormatError("block " + std::to_string(i) + " does not match the declared shapes (" +
                          b.name + ")");
      }
      for (int r = 0; r < b.rows; ++r) {
        for (int c = 0; c < b.cols; ++c) b.data[static_cast<std::size_t>(c) * b.rows + r] = get_float(in);
      }
    }
    if (m.mixer) {
      for (int h = 0; h < 4; ++h) m.mixer->mutable_hypernet(h) = std::move(mixer_nets[h]);
    }
    CheckpointMeta& meta = loaded.meta;
    meta.epoch = header.at("epoch").get<int>();
    meta.seed = header.at("seed").get<std::uint64_t>();
    const json& cj = header.at("curriculum");
    meta.curriculum.radius = cj.at("radius").get<int>();
    meta.curriculum.radius_cap = cj.at("radius_cap").get<int>();
    meta.curriculum.unbounded = cj.at("unbounded").get<bool>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed checkpoint header: ") + e.what());
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes in checkpoint");
  return loaded;
}

}  // namespace cactus
