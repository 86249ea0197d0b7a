#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "ptdt/envs/policy.hpp"
#include "ptdt/trajdata/dataset_io.hpp"
#include "ptdt/trajdata/prompt.hpp"
#include "ptdt/trajdata/sequence.hpp"

using namespace ptdt;
using namespace ptdt::traj;

namespace {

Episode synthetic_episode(int length, int d_s, int d_a, std::uint64_t seed, envs::Quality q = envs::Quality::Expert) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Episode ep;
  ep.family = d_s == 4 ? envs::Family::PointDir2d : d_s == 2 && d_a == 1 ? envs::Family::PointVel1d
                                                                          : envs::Family::PointReach2d;
  ep.state_dim = d_s;
  ep.action_dim = d_a;
  ep.quality = q;
  ep.seed = seed;
  for (int t = 0; t < length; ++t) {
    for (int i = 0; i < d_s; ++i) ep.states.push_back(n(rng));
    for (int i = 0; i < d_a; ++i) ep.actions.push_back(n(rng));
    ep.rewards.push_back(n(rng));
  }
  ep.finalize();
  return ep;
}

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "ptdt_test_trajdata";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("compute_rtg: suffix sums") {
  CHECK(compute_rtg(std::vector<double>{1, 2, 3}) == std::vector<double>{6, 5, 3});
  CHECK(compute_rtg(std::vector<double>{0, 0}) == std::vector<double>{0, 0});
  CHECK(compute_rtg(std::vector<double>{}).empty());
}

TEST_CASE("property: rtg recurrence holds for random reward vectors") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const int len = std::uniform_int_distribution<int>(1, 60)(rng);
    std::vector<double> r(len);
    for (auto& x : r) x = std::uniform_real_distribution<double>(-5, 5)(rng);
    auto rtg = compute_rtg(r);
    REQUIRE(rtg.size() == r.size());
    CHECK(rtg.back() == r.back());
    for (int t = 0; t + 1 < len; ++t) CHECK(rtg[t] == r[t] + rtg[t + 1]);
  }
}

TEST_CASE("sample_prompt: window bounds, quality filter, determinism") {
  EpisodeSet set;
  set.episodes.push_back(synthetic_episode(100, 2, 1, 1, envs::Quality::Random));
  set.episodes.push_back(synthetic_episode(100, 2, 1, 2, envs::Quality::Expert));
  PromptSampling cfg{.length = 5, .quality = envs::Quality::Expert};
  Rng rng(3);
  for (int i = 0; i < 300; ++i) {
    auto p = sample_prompt(set, 0, cfg, rng);
    CHECK(p.length() == 5);
    CHECK(p.source_episode == 1);
    CHECK(p.timesteps.front() >= 0);
    CHECK(p.timesteps.front() <= 95);
    CHECK(p.timesteps.back() == p.timesteps.front() + 4);
    CHECK(p.rtg[0] == set.episodes[1].rtg[p.timesteps[0]]);
  }
  Rng a(11), b(11);
  CHECK(sample_prompt(set, 0, cfg, a) == sample_prompt(set, 0, cfg, b));

  PromptSampling medium{.length = 5, .quality = envs::Quality::Medium};
  CHECK_THROWS_AS(sample_prompt(set, 0, medium, rng), DataError);
  CHECK_THROWS_AS(sample_prompt(set, 9, cfg, rng), DataError);
}

TEST_CASE("sample_prompt: multi-segment prompts keep total length") {
  EpisodeSet set;
  for (int i = 0; i < 4; ++i) set.episodes.push_back(synthetic_episode(30, 4, 2, 10 + i));
  PromptSampling cfg{.length = 5, .segments = 2};
  Rng rng(5);
  auto p = sample_prompt(set, 0, cfg, rng);
  CHECK(p.length() == 5);
  CHECK(p.states.size() == 20u);
  CHECK(p.source_episode == -1);
}

TEST_CASE("assemble_input: token counts and padding") {
  auto ep = synthetic_episode(100, 4, 2, 4);
  auto prompt = cut_prompt(ep, 10, 5, 0);

  auto full = assemble_input(prompt, history_window(ep, 50, 20), 20);
  CHECK(full.tokens() == 75);
  int padded = 0;
  for (int tok = 0; tok < full.tokens(); ++tok) padded += full.token_is_padding(0, tok);
  CHECK(padded == 0);

  auto one = assemble_input(prompt, history_window(ep, 0, 20), 20);
  int real = 0;
  for (int tok = 0; tok < one.tokens(); ++tok) real += !one.token_is_padding(0, tok);
  CHECK(real == 18);
  // The single real history step sits in the last slot.
  CHECK(one.valid[19] == 1);
  CHECK(one.valid[0] == 0);

  History empty;
  empty.state_dim = 4;
  empty.action_dim = 2;
  CHECK_THROWS_AS(assemble_input(prompt, empty, 20), ContractError);
}

TEST_CASE("assemble_input: prompt tokens precede history tokens; mask is causal") {
  auto ep = synthetic_episode(40, 2, 1, 5);
  auto prompt = cut_prompt(ep, 3, 5, 0);
  auto b = assemble_input(prompt, history_window(ep, 12, 10), 10);
  CHECK(SequenceBatch::token_index(4, 2) < SequenceBatch::token_index(5, 0));
  CHECK(b.prompt_rtg == prompt.rtg);
  CHECK(b.rtg.back() == ep.rtg[12]);
  for (int q = 0; q < b.tokens(); ++q) {
    for (int k = q + 1; k < b.tokens(); ++k) CHECK_FALSE(b.visible(0, q, k));
    for (int k = 0; k < 15; ++k) {
      if (k <= q) CHECK(b.visible(0, q, k));
    }
  }
}

TEST_CASE("assemble_input: inference position lacks the final action") {
  auto ep = synthetic_episode(10, 2, 1, 6);
  auto h = history_window(ep, 4, 20);
  h.actions.pop_back();
  auto b = assemble_input(cut_prompt(ep, 0, 2, 0), h, 20);
  CHECK(b.has_target[19] == 0);
  CHECK(b.has_target[18] == 1);
  CHECK(b.actions[19] == 0.0);
}

TEST_CASE("assemble_input: deterministic and injective on distinct histories") {
  auto ep = synthetic_episode(60, 4, 2, 8);
  auto prompt = cut_prompt(ep, 0, 5, 0);
  auto b1 = assemble_input(prompt, history_window(ep, 30, 20), 20);
  auto b2 = assemble_input(prompt, history_window(ep, 30, 20), 20);
  auto b3 = assemble_input(prompt, history_window(ep, 31, 20), 20);
  CHECK(b1.states == b2.states);
  CHECK(b1.rtg == b2.rtg);
  CHECK(b1.states != b3.states);
}

TEST_CASE("flatten_prompt: dimension and per-step component ordering") {
  auto ep = synthetic_episode(20, 2, 2, 9);
  auto p = cut_prompt(ep, 2, 5, 0);
  auto flat = flatten_prompt(p);
  CHECK(flat.layout.dim() == 25);
  CHECK(flat.x.size() == 25u);
  CHECK(flat.x[0] == p.rtg[0]);
  CHECK(flat.x[1] == p.states[0]);
  CHECK(flat.x[3] == p.actions[0]);
  CHECK(flat.x[5] == p.rtg[1]);
  CHECK(flat.x.back() == p.actions.back());
  CHECK_THROWS_AS(unflatten_prompt(std::vector<double>(24, 0.0), flat.layout), ShapeError);
}

TEST_CASE("property: flatten/unflatten is an exact bijection over families and lengths") {
  std::mt19937_64 rng(12);
  for (auto family : {envs::Family::PointVel1d, envs::Family::PointDir2d, envs::Family::PointReach2d}) {
    const auto dims = envs::family_dims(family);
    for (int k : {2, 5, 10}) {
      auto ep = synthetic_episode(30, dims.state_dim, dims.action_dim, rng());
      auto p = cut_prompt(ep, 7, k, 3);
      auto flat = flatten_prompt(p);
      CHECK(flat.layout.dim() == (1 + dims.state_dim + dims.action_dim) * k);
      CHECK(unflatten_prompt(flat.x, flat.layout) == p);
      // And the other direction: any vector maps back to itself.
      std::vector<double> x(flat.x.size());
      for (auto& v : x) v = std::normal_distribution<double>(0, 10)(rng);
      CHECK(flatten_prompt(unflatten_prompt(x, flat.layout)).x == x);
      auto restored = prompt_from_json(prompt_to_json(flat));
      CHECK(restored.x == flat.x);
      CHECK(restored.layout == flat.layout);
    }
  }
}

TEST_CASE("dataset_io: round trip, truncated line, empty file") {
  envs::TaskSpec task = envs::enumerate_tasks(envs::Family::PointReach2d, 4)[1];
  envs::MediumCalibration cal{envs::Family::PointReach2d, 0.4, 0.5, 0.0};
  auto set = envs::generate_dataset(task, envs::QualityMix::gradient(), 6, 99, cal);
  auto path = temp_file("roundtrip.jsonl");
  save_dataset(path, set, "abc");
  CHECK(load_dataset(path) == set);

  std::string content;
  {
    std::ifstream in(path);
    content.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto second_newline = content.find('\n', content.find('\n') + 1);
  {
    std::ofstream out(temp_file("truncated.jsonl"));
    out << content.substr(0, second_newline + 40);
  }
  try {
    load_dataset(temp_file("truncated.jsonl"));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }

  { std::ofstream out(temp_file("empty.jsonl")); }
  CHECK(load_dataset(temp_file("empty.jsonl")).empty());
  CHECK_THROWS_AS(load_dataset(temp_file("missing.jsonl")), DataError);
}
