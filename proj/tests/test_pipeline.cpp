#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "segkit/config.hpp"
#include "segkit/error.hpp"
#include "segkit/pipeline.hpp"
#include "segkit/serialize.hpp"
#include "segkit/svg.hpp"
#include "segkit/synthgen.hpp"

using namespace segkit;
namespace fs = std::filesystem;

namespace {

std::string message_of(auto&& fn, ErrorCode expected) {
  try {
    fn();
  } catch (const Error& e) {
    CHECK(e.code() == expected);
    return e.what();
  }
  FAIL("expected segkit::Error");
  return {};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("segkit_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* kCsvConfig = R"(
seed: 7
output: out
input:
  csv:
    path: people.csv
    schema:
      year: numeric
      sector: categorical
      female: boolean
analyses:
  - name: seg
    type: segregation
    options:
      pooling: per_time
  - name: ss
    type: shiftshare
    after: [seg]
)";

// four sectors, two years: A and B female dominated, C and D male dominated
void write_people(const fs::path& dir) {
  std::ofstream out(dir / "people.csv");
  out << "year,sector,female\n";
  // [t][sector][female, male]
  const int cells[2][4][2] = {{{30, 10}, {20, 5}, {5, 30}, {5, 15}}, {{35, 10}, {20, 10}, {5, 30}, {10, 20}}};
  for (int t = 0; t < 2; ++t)
    for (int j = 0; j < 4; ++j)
      for (int g = 0; g < 2; ++g)
        for (int i = 0; i < cells[t][j][g]; ++i)
          out << 2010 + t << ',' << static_cast<char>('A' + j) << ',' << (g ? "0" : "1") << '\n';
}

}  // namespace

TEST_CASE("yaml scalars") {
  const Json j = yaml_to_json("a: 1\nb: 2.5\nc: true\nd: \"1\"\ne: text\nf: [x, 3]\n");
  CHECK(j["a"] == 1);
  CHECK(j["b"] == 2.5);
  CHECK(j["c"] == true);
  CHECK(j["d"] == "1");
  CHECK(j["e"] == "text");
  CHECK(j["f"][1] == 3);
  message_of([] { yaml_to_json("a: [1, 2"); }, ErrorCode::kConfigInvalid);
}

TEST_CASE("config validation") {
  const auto good = parse_config(kCsvConfig, "/data");
  CHECK(good.seed == 7);
  CHECK(*good.input.csv == fs::path("/data/people.csv"));
  REQUIRE(good.analyses.size() == 2);
  CHECK(good.analyses[1].after == std::vector<std::string>{"seg"});

  std::string text = kCsvConfig;
  auto edit = [&](const std::string& from, const std::string& to) {
    std::string t = text;
    t.replace(t.find(from), from.size(), to);
    return t;
  };

  auto msg = message_of([&] { parse_config(edit("type: segregation", "type: segregate")); }, ErrorCode::kConfigInvalid);
  CHECK(msg.find("segregate") != std::string::npos);
  for (const auto& t : analysis_types()) CHECK(msg.find(t) != std::string::npos);

  msg = message_of([&] { parse_config(edit("pooling: per_time", "sector: industry")); }, ErrorCode::kConfigInvalid);
  CHECK(msg.find("'industry'") != std::string::npos);

  msg = message_of([&] { parse_config(edit("pooling: per_time", "colour: red")); }, ErrorCode::kConfigInvalid);
  CHECK(msg.find("'colour'") != std::string::npos);

  msg = message_of([&] { parse_config(edit("pooling: per_time", "pooling: sometimes")); }, ErrorCode::kConfigInvalid);
  CHECK(msg.find("pooling") != std::string::npos);

  const std::string cyclic = edit("type: segregation\n", "type: segregation\n    after: [ss]\n");
  msg = message_of([&] { parse_config(cyclic); }, ErrorCode::kConfigInvalid);
  CHECK(msg.find("cyclic") != std::string::npos);

  msg = message_of([&] { parse_config(edit("after: [seg]", "after: [nothing]")); }, ErrorCode::kConfigInvalid);
  CHECK(msg.find("nothing") != std::string::npos);

  message_of([&] { parse_config(edit("seed: 7", "seed: -1")); }, ErrorCode::kConfigInvalid);
  message_of([&] { parse_config(edit("seed: 7", "sead: 7")); }, ErrorCode::kConfigInvalid);
  message_of([] { parse_config("input: {synth: {}}\nanalyses: [{type: kbo, options: {mincer: m}}]\n"); },
             ErrorCode::kConfigInvalid);
}

TEST_CASE("shipped config validates") {
  const auto config = load_config(fs::path(SEGKIT_SOURCE_DIR) / "configs" / "paper-replica.yaml");
  CHECK(config.input.synth.has_value());
  CHECK(config.input.synth->n_workers == 200000);
  const auto levels = execution_levels(config);
  std::size_t total = 0;
  for (const auto& l : levels) total += l.size();
  CHECK(total == config.analyses.size());
  // every analysis runs strictly after what it depends on
  std::map<std::string, std::size_t> level_of;
  for (std::size_t l = 0; l < levels.size(); ++l)
    for (auto i : levels[l]) level_of[config.analyses[i].name] = l;
  for (const auto& a : config.analyses) {
    for (const auto& dep : a.after) CHECK(level_of.at(dep) < level_of.at(a.name));
    if (auto m = option_string(a, "mincer")) CHECK(level_of.at(*m) < level_of.at(a.name));
  }
}

TEST_CASE("synthetic schema lists the generated columns") {
  auto spec = calibrate_to_paper();
  spec.n_workers = 2000;
  const auto data = generate(spec);
  const auto schema = synth_schema();
  REQUIRE(schema.size() == data.frame.n_cols());
  for (std::size_t i = 0; i < schema.size(); ++i) {
    CHECK(schema[i].first == data.frame.columns()[i].name());
    CHECK(schema[i].second == data.frame.columns()[i].kind());
  }
}

TEST_CASE("dgp overrides") {
  const auto spec = parse_dgp(yaml_to_json("seed: 9\nn_workers: 5000\ntau: 0\nfemale: {sigma: 0.3}\n"));
  CHECK(spec.seed == 9);
  CHECK(spec.n_workers == 5000);
  CHECK(spec.tau == 0.0);
  CHECK(spec.gender[0].sigma == 0.3);
  message_of([] { parse_dgp(yaml_to_json("female: {height: 2}\n")); }, ErrorCode::kConfigInvalid);
}

TEST_CASE("svg timestamp is optional") {
  Plot p{"t", "x", "y", {}, {}, {}, {}};
  p.series.push_back({"s", {0, 1, 2}, {1, 3, 2}, {}, {}, SeriesStyle::kLine});
  const auto plain = render_svg(p);
  CHECK(plain.rfind("<svg", 0) == 0);
  CHECK(plain.find("generated") == std::string::npos);
  CHECK(render_svg(p) == plain);
  const auto stamped = render_svg(p, "2020-01-01T00:00:00Z");
  CHECK(stamped.find("2020-01-01T00:00:00Z") != std::string::npos);
}

TEST_CASE("atomic writes create directories and replace content") {
  const auto dir = scratch("atomic");
  const auto file = dir / "a" / "b.txt";
  write_file_atomic(file, "one");
  write_file_atomic(file, "two");
  CHECK(slurp(file) == "two");
  CHECK(!fs::exists(dir / "a" / "b.txt.tmp"));
}

TEST_CASE("csv pipeline end to end, byte-identical when deterministic") {
  const auto dir = scratch("run");
  write_people(dir);
  {
    std::ofstream(dir / "config.yaml") << kCsvConfig;
  }
  const auto config = load_config(dir / "config.yaml");

  RunOptions opt;
  opt.deterministic = true;
  opt.out = dir / "first";
  const auto report = run_pipeline(config, opt);
  for (const char* f : {"seg/panel.csv", "seg/ssi.csv", "seg/ssi.json", "seg/ssi_series.svg", "ss/shiftshare_F.csv",
                        "ss/shiftshare_F.svg", "manifest.json"})
    CHECK(fs::exists(dir / "first" / f));
  CHECK(std::find(report.files.begin(), report.files.end(), "seg/ssi.csv") != report.files.end());

  // 2010: women and men both total 60; fd = (|30-10| + |20-5|) / 120, md = (|5-30| + |5-15|) / 120
  const auto ssi = slurp(dir / "first" / "seg" / "ssi.csv");
  CHECK(ssi.find("2010,fd,0.291666666666666") != std::string::npos);
  CHECK(ssi.find("2010,md,0.291666666666666") != std::string::npos);

  opt.out = dir / "second";
  const auto again = run_pipeline(config, opt);
  REQUIRE(again.files == report.files);
  for (const auto& f : report.files) CHECK(slurp(dir / "first" / f) == slurp(dir / "second" / f));
}

TEST_CASE("stage failures name the stage") {
  const auto dir = scratch("fail");
  {
    std::ofstream(dir / "people.csv") << "year,sector,female\n2010,A,1\n2010,B,1\n2010,C,1\n2010,D,1\n";
  }
  const auto config = parse_config(kCsvConfig, dir);
  RunOptions opt;
  opt.out = dir / "out";
  try {
    run_pipeline(config, opt);
    FAIL("expected a stage error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "seg");
    CHECK(e.cause() == ErrorCode::kZeroGenderTotal);
  }
}
