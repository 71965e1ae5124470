#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "lmt/io.hpp"
#include "lmt/scenario.hpp"

using namespace lmt;

TEST(Quantity, Units) {
  EXPECT_DOUBLE_EQ(parse_quantity("780.24 nm", Dim::Length, "t"), 780.24e-9);
  EXPECT_DOUBLE_EQ(parse_quantity("1 ms", Dim::Time, "t"), 1e-3);
  EXPECT_DOUBLE_EQ(parse_quantity("393.5 m/s2", Dim::Accel, "t"), 393.5);
  EXPECT_DOUBLE_EQ(parse_quantity("1 g", Dim::Accel, "t"), 9.80665);
  EXPECT_DOUBLE_EQ(parse_quantity("6 MHz", Dim::Rate, "t"), 2.0 * pi * 6e6);
  EXPECT_DOUBLE_EQ(parse_quantity("300 urad", Dim::Angle, "t"), 300e-6);
  EXPECT_DOUBLE_EQ(parse_quantity("20 Er", Dim::Energy, "t"), 20.0);
  EXPECT_DOUBLE_EQ(parse_quantity("3", Dim::None, "t"), 3.0);
}

TEST(Quantity, Errors) {
  EXPECT_THROW(parse_quantity("20", Dim::Energy, "t"), ConfigError);
  EXPECT_THROW(parse_quantity("20 ms", Dim::Energy, "t"), ConfigError);
  EXPECT_THROW(parse_quantity("20 parsec", Dim::Length, "t"), ConfigError);
  EXPECT_THROW(parse_quantity("abc", Dim::None, "t"), ConfigError);
  EXPECT_THROW(parse_quantity("3 ms", Dim::None, "t"), ConfigError);
}

TEST(Quantity, ListSharesTrailingUnit) {
  const auto v = parse_list("0.01, 0.1 ms, 1, 10 ms", Dim::Time, "t");
  ASSERT_EQ(v.size(), 4u);
  EXPECT_DOUBLE_EQ(v[0], 1e-5);
  EXPECT_DOUBLE_EQ(v[2], 1e-3);
  EXPECT_DOUBLE_EQ(v[3], 1e-2);
  EXPECT_THROW(parse_list("", Dim::Time, "t"), ConfigError);
}

TEST(Parse, FullScenario) {
  const auto sc = parse_scenario(R"(
# comment
[species]
preset = cs133
lattice_wavelength = 943.96 nm   ; trailing comment

[laser]
preset = kim
tilt_jitter = 300 urad

[lattice]
depth = 40 Er
alpha_max = 2

[schedule]
count = 100
accel = 400 m/s^2
tau_ramp = 0.5 ms

[scan]
depths = 10, 20 Er
models = ws, lz

[tdse]
frame = reduced
lattice_shift = yes
)");
  EXPECT_EQ(sc.species.name, "cs133");
  EXPECT_DOUBLE_EQ(sc.species.lattice_wavelength, 943.96e-9);
  // detuning follows the changed wavelength
  EXPECT_NEAR(sc.species.detuning, 2.0 * pi * si::c / 943.96e-9 - sc.species.resonance_frequency, 1.0);
  EXPECT_DOUBLE_EQ(sc.laser.power, 6.0);
  EXPECT_DOUBLE_EQ(sc.tilt_jitter, 300e-6);
  EXPECT_EQ(sc.depth, 40.0);
  EXPECT_EQ(sc.alpha_max, 2);
  EXPECT_EQ(sc.count, 100.0);
  EXPECT_EQ(sc.accel, 400.0);
  EXPECT_EQ(sc.tau_ramp, 0.5e-3);
  EXPECT_EQ(sc.scan.depths, (std::vector<double>{10.0, 20.0}));
  EXPECT_EQ(sc.scan.models, (std::vector<std::string>{"ws", "lz"}));
  EXPECT_EQ(sc.tdse.frame, Frame::Reduced);
  EXPECT_TRUE(sc.tdse.lattice_shift);
  EXPECT_EQ(sc.floquet().alpha_max, 2);
}

TEST(Parse, Defaults) {
  const auto sc = parse_scenario("");
  EXPECT_EQ(sc.species.name, "rb87");
  EXPECT_EQ(sc.depth, 20.0);
  EXPECT_EQ(sc.tau_load, 2e-3);
  EXPECT_EQ(sc.accel_grid().size(), 1101u);
}

TEST(Parse, Rejections) {
  EXPECT_THROW(parse_scenario("[lattice]\ndepht = 20 Er\n"), ConfigError);
  EXPECT_THROW(parse_scenario("[latice]\n"), ConfigError);
  EXPECT_THROW(parse_scenario("depth = 20 Er\n"), ConfigError);
  EXPECT_THROW(parse_scenario("[lattice]\ndepth = 20 Er\ndepth = 30 Er\n"), ConfigError);
  EXPECT_THROW(parse_scenario("[lattice]\ndepth 20\n"), ConfigError);
  EXPECT_THROW(parse_scenario("[lattice]\ndepth = 20\n"), ConfigError);
  EXPECT_THROW(parse_scenario("[scan]\nmodels = ws, magic\n"), ConfigError);
  EXPECT_THROW(parse_scenario("[scan]\ndepths = 40, 20 Er\n"), ConfigError);
  EXPECT_THROW(parse_scenario("[tdse]\nframe = rotating\n"), ConfigError);
  EXPECT_THROW(parse_scenario("[lattice]\nalpha_max = 1.5\n"), ConfigError);
}

TEST(Parse, ErrorNamesTheLine) {
  try {
    parse_scenario("[lattice]\n\ndepht = 20 Er\n", "file.ini");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("file.ini:3"), std::string::npos) << e.what();
  }
}

TEST(Hash, StableAndSensitive) {
  const auto a = parse_scenario("[lattice]\ndepth = 20 Er\n");
  const auto b = parse_scenario("[lattice]\ndepth = 20.0 Er   # same\n");
  const auto c = parse_scenario("[lattice]\ndepth = 20.0001 Er\n");
  EXPECT_EQ(a.settings_hash(), b.settings_hash());
  EXPECT_NE(a.settings_hash(), c.settings_hash());
  EXPECT_EQ(a.settings_hash().size(), 16u);
  // defaults written out explicitly hash like omitted keys
  EXPECT_EQ(parse_scenario("").settings_hash(), parse_scenario("[schedule]\ncount = 500\n").settings_hash());
}

TEST(Files, LoadAndMissing) {
  const auto path = std::filesystem::temp_directory_path() / "lmt_scenario_test.ini";
  {
    std::ofstream f(path);
    f << "[schedule]\ncount = 42\n";
  }
  const auto sc = load_scenario(path.string());
  EXPECT_EQ(sc.count, 42.0);
  EXPECT_EQ(sc.origin, path.string());
  std::filesystem::remove(path);
  EXPECT_THROW(load_scenario("/nonexistent/x.ini"), ConfigError);
}

TEST(Csv, FormatsCells) {
  EXPECT_EQ(io::format_cell(io::Cell{}), "NA");
  EXPECT_EQ(io::format_cell(io::Cell(0.1)), "0.10000000000000001");
  EXPECT_EQ(io::format_cell(io::Cell(7L)), "7");
  EXPECT_EQ(io::format_cell(io::Cell(std::string("a,b"))), "\"a,b\"");
  EXPECT_EQ(io::format_cell(io::Cell(std::string("say \"x\""))), "\"say \"\"x\"\"\"");
  EXPECT_EQ(io::format_cell(io::opt(std::nullopt)), "NA");
}

TEST(Csv, RoundTripsDoubles) {
  const double v = 1.0 / 3.0;
  EXPECT_EQ(std::stod(io::format_cell(io::Cell(v))), v);
  const auto path = std::filesystem::temp_directory_path() / "lmt_csv_test.csv";
  {
    io::CsvWriter w(path, {"a", "b"});
    w.row({1.5, std::string("x")});
    EXPECT_THROW(w.row({1.0}), PreconditionError);
  }
  std::ifstream f(path);
  std::string l1, l2;
  std::getline(f, l1);
  std::getline(f, l2);
  EXPECT_EQ(l1, "a,b");
  EXPECT_EQ(l2, "1.5,x");
  std::filesystem::remove(path);
}

TEST(Golden, Comparison) {
  nlohmann::json e, a;
  e["settings_hash"] = "abc";
  a["settings_hash"] = "abc";
  e["golden"] = {{"x", 1.0}, {"y", 2.0}, {"z", 0.0}};
  a["golden"] = {{"x", 1.0 + 1e-12}, {"y", 2.1}, {"z", 1e-9}};
  const auto m = io::compare_golden(e, a, {{"y", 0.01}, {"z", 1e-8}}, 1e-9, {"z"});
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0].name, "y");
  a["settings_hash"] = "def";
  EXPECT_EQ(io::compare_golden(e, a, {{"y", 0.1}}, 1e-9, {"z"}).front().name, "settings_hash");
}
