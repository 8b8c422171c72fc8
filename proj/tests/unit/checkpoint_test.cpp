#include <bit>
#include <cactus/checkpoint.hpp>
#include <cactus/error.hpp>
#include <filesystem>
#include <fstream>
#include <gtest/gtest.h>

#include "oracles.hpp"

namespace cactus {
namespace {

namespace fs = std::filesystem;

TrainConfig tiny(CriticMode mode) {
  TrainConfig c;
  c.agents = 2;
  c.hidden = 8;
  c.hypernet_hidden = 8;
  c.embed = 4;
  c.critic_mode = mode;
  return c;
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("cactus_ckpt_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // A bundle whose optimizer moments are non-trivial.
  static ModelBundle trained(CriticMode mode, std::uint64_t seed) {
    Rng rng = derive_rng({seed});
    ModelBundle m = ModelBundle::create(tiny(mode), rng);
    VectorX<float> g(m.actor.parameter_count());
    for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = static_cast<float>(uniform_unit(rng) - 0.5);
    adam_step(m.actor.mutable_parameters(), g, m.actor_opt);
    return m;
  }

  fs::path dir_;
};

void expect_same(const ModelBundle& a, const ModelBundle& b) {
  EXPECT_EQ(a.critic_mode, b.critic_mode);
  EXPECT_EQ(a.actor.widths(), b.actor.widths());
  EXPECT_EQ(a.actor.parameters(), b.actor.parameters());
  EXPECT_EQ(a.utility.parameters(), b.utility.parameters());
  EXPECT_EQ(a.actor_opt.first_moment, b.actor_opt.first_moment);
  EXPECT_EQ(a.actor_opt.second_moment, b.actor_opt.second_moment);
  EXPECT_EQ(a.actor_opt.step, b.actor_opt.step);
  EXPECT_EQ(a.utility_opt.step, b.utility_opt.step);
  ASSERT_EQ(a.mixer.has_value(), b.mixer.has_value());
  if (a.mixer) {
    EXPECT_EQ(a.mixer->parameters(), b.mixer->parameters());
    EXPECT_EQ(a.mixer->shape().agents, b.mixer->shape().agents);
    EXPECT_EQ(a.mixer_opt.first_moment, b.mixer_opt.first_moment);
  }
}

TEST_F(CheckpointTest, RoundTripBothModes) {
  for (CriticMode mode : {CriticMode::Qmix, CriticMode::Independent}) {
    const ModelBundle m = trained(mode, 1);
    CheckpointMeta meta{17, 99, CurriculumState::bounded(9)};
    meta.curriculum.radius = 4;
    const fs::path path = dir_ / (std::string(critic_mode_name(mode)) + ".ckpt");
    save_checkpoint(path, m, meta);
    const LoadedCheckpoint loaded = load_checkpoint(path);
    expect_same(m, loaded.models);
    EXPECT_EQ(loaded.meta.epoch, 17);
    EXPECT_EQ(loaded.meta.seed, 99u);
    EXPECT_EQ(loaded.meta.curriculum.radius, 4);
    EXPECT_EQ(loaded.meta.curriculum.radius_cap, 9);
    EXPECT_FALSE(loaded.meta.curriculum.unbounded);
  }
}

TEST_F(CheckpointTest, LoadedModelsPredictIdentically) {
  const ModelBundle m = trained(CriticMode::Qmix, 2);
  save_checkpoint(dir_ / "a", m, {});
  const LoadedCheckpoint loaded = load_checkpoint(dir_ / "a");
  Rng rng = derive_rng({3});
  MatrixX<float> x(kObservationSize, 4);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = static_cast<float>(uniform_unit(rng));
  EXPECT_EQ(m.actor.predict(x), loaded.models.actor.predict(x));
}

TEST_F(CheckpointTest, SavesAreByteIdentical) {
  const ModelBundle m = trained(CriticMode::Qmix, 4);
  save_checkpoint(dir_ / "a", m, {3, 5, CurriculumState::infinite()});
  save_checkpoint(dir_ / "b", m, {3, 5, CurriculumState::infinite()});
  EXPECT_EQ(testing::read_file((dir_ / "a").string()), testing::read_file((dir_ / "b").string()));
  const LoadedCheckpoint loaded = load_checkpoint(dir_ / "a");
  save_checkpoint(dir_ / "c", loaded.models, loaded.meta);
  EXPECT_EQ(testing::read_file((dir_ / "a").string()), testing::read_file((dir_ / "c").string()));
}

TEST_F(CheckpointTest, LayoutIsLittleEndianRowMajor) {
  Rng rng = derive_rng({5});
  ModelBundle m = ModelBundle::create(tiny(CriticMode::Independent), rng);
  save_checkpoint(dir_ / "a", m, {});
  const std::string bytes = testing::read_file((dir_ / "a").string());
  ASSERT_GT(bytes.size(), 16u);
  EXPECT_EQ(bytes.substr(0, 8), "CACTUSCK");
  auto u32 = [&](std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
    return v;
  };
  EXPECT_EQ(u32(8), kCheckpointVersion);
  const std::uint32_t header = u32(12);
  // The first block is actor.W0 (out x in), written row by row.
  const auto w = m.actor.weight(0);
  const std::size_t base = 16 + header;
  for (int c = 0; c < 3; ++c) {
    EXPECT_EQ(std::bit_cast<float>(u32(base + 4 * c)), w(0, c));
  }
  EXPECT_EQ(std::bit_cast<float>(u32(base + 4 * w.cols())), w(1, 0));
}

TEST_F(CheckpointTest, ManifestListsCounts) {
  const ModelBundle m = trained(CriticMode::Qmix, 6);
  save_checkpoint(dir_ / "a", m, {12, 7, {}});
  const std::string manifest = testing::read_file(manifest_path(dir_ / "a").string());
  const ModelSummary s = summarize(m);
  EXPECT_NE(manifest.find("format_version = 1"), std::string::npos);
  EXPECT_NE(manifest.find("epoch = 12"), std::string::npos);
  EXPECT_NE(manifest.find("seed = 7"), std::string::npos);
  EXPECT_NE(manifest.find("critic_mode = qmix"), std::string::npos);
  EXPECT_NE(manifest.find("total_parameters = " + std::to_string(s.total())), std::string::npos);
}

void write_bytes(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

TEST_F(CheckpointTest, RejectsDamagedFiles) {
  const ModelBundle m = trained(CriticMode::Qmix, 7);
  save_checkpoint(dir_ / "good", m, {});
  const std::string good = testing::read_file((dir_ / "good").string());

  EXPECT_THROW(load_checkpoint(dir_ / "missing"), FormatError);

  std::string bad = good;
  bad[0] = 'X';
  write_bytes(dir_ / "magic", bad);
  EXPECT_THROW(load_checkpoint(dir_ / "magic"), FormatError);

  bad = good;
  bad[8] = 2;
  write_bytes(dir_ / "version", bad);
  EXPECT_THROW(load_checkpoint(dir_ / "version"), FormatError);

  write_bytes(dir_ / "short", good.substr(0, good.size() - 3));
  EXPECT_THROW(load_checkpoint(dir_ / "short"), FormatError);

  write_bytes(dir_ / "long", good + "x");
  EXPECT_THROW(load_checkpoint(dir_ / "long"), FormatError);

  bad = good;
  const std::string block = "\"name\":\"actor.W0\",\"rows\":8";
  const auto at = bad.find(block);
  ASSERT_NE(at, std::string::npos);
  bad[at + block.size() - 1] = '9';  // declared shape no longer matches the network
  write_bytes(dir_ / "shape", bad);
  EXPECT_THROW(load_checkpoint(dir_ / "shape"), FormatError);

  bad = good;
  bad[20] = '}';
  write_bytes(dir_ / "json", bad);
  EXPECT_THROW(load_checkpoint(dir_ / "json"), FormatError);
}

}  // namespace
}  // namespace cactus
