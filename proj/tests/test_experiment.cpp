#include <filesystem>
#include <fstream>
#include <numbers>

#include <gtest/gtest.h>

#include "qbnet/experiment.hpp"

using namespace qbnet;

namespace {

std::string small_config(double w = 4.5, const std::string& extra = "")
{
    return R"({
  "model": {"preset": "circuit"},
  "psgs": {"frequencies": [)" + std::to_string(w) + R"(], "amplitudes": [5.0]},
  "sampling": {"T": 0.05, "nd": 200},
  "noise": {"sigma": [0.01], "seeds": 2, "master_seed": 5})" + extra + R"(
})";
}

std::string error_of(const std::string& text)
{
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST(Config, PresetDefaults)
{
    const auto c = parse_config(R"({"model": {"preset": "circuit"}})");
    EXPECT_EQ(c.theta_true, circuit_true_theta());
    EXPECT_EQ(c.freqs, std::vector<double>{4.5});
    EXPECT_EQ(c.amplitudes, std::vector<double>{5.0});
    EXPECT_DOUBLE_EQ(c.T, 0.05);
    EXPECT_EQ(c.nd, 10000u);
    EXPECT_DOUBLE_EQ(c.step(), 0.0025);
    EXPECT_EQ(c.fit_sets.size(), 3u);
    ASSERT_EQ(c.tuples.size(), 3u);
    EXPECT_EQ(c.tuples[2], MultiIndex({0, 0, 0}));
}

TEST(Config, TuplesAreOneBased)
{
    const auto c = parse_config(R"({"model": {"preset": "circuit"}, "tuples": [[1, 2]], "fit": {"sets": [[[1]]]}})");
    ASSERT_EQ(c.tuples.size(), 2u);
    EXPECT_EQ(c.tuples[0], MultiIndex({0, 1}));
    EXPECT_EQ(c.tuples[1], MultiIndex({0}));
}

TEST(Config, ErrorsCarryLineNumbers)
{
    const std::string text = "{\n  \"model\": {\"preset\": \"circuit\"},\n  \"sampling\": {\n    \"T\": -1,\n    \"nd\": 2.5\n  }\n}";
    const std::string msg = error_of(text);
    EXPECT_NE(msg.find("line 4: T"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 5: nd"), std::string::npos) << msg;
}

TEST(Config, SyntaxErrorLine)
{
    const std::string msg = error_of("{\n  \"model\": {\"preset\": \"circuit\"},\n  \"noise\": {,}\n}");
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
}

TEST(Config, UnknownPresetAndMissingModel)
{
    EXPECT_NE(error_of(R"({"model": {"preset": "pendulum"}})").find("unknown preset"), std::string::npos);
    EXPECT_NE(error_of("{}").find("expected \"preset\""), std::string::npos);
}

TEST(Config, WeightShapeChecked)
{
    const std::string msg = error_of(R"({"model": {"preset": "circuit"}, "fit": {"sets": [[[1]]], "weights": [[1, 2]]}})");
    EXPECT_NE(msg.find("weights"), std::string::npos);
}

TEST(Config, InlineModel)
{
    const std::string text = R"({
  "model": {
    "subsystems": [{"E": [[1]], "A_xx": [[-1]], "B_xv": [[1]], "B_xu": [[1]], "C_zx": [[1]], "C_yx": [[1]]},
                   {"E": [[1]], "A_xx": [[-2]], "B_xv": [[1]], "B_xu": [[0]], "C_zx": [[1]], "C_yx": [[1]]}],
    "basis": [[[0, 0], [1, 0]]],
    "input_map": [[1], [0]],
    "theta_true": [0.5]
  }
})";
    const auto c = parse_config(text);
    EXPECT_EQ(c.network.subsystems.size(), 2u);
    EXPECT_EQ(c.theta0.size(), 1);
}

TEST(Checkpoints, LogSpacedAndTerminal)
{
    const auto c = checkpoints(10000, 10, false);
    EXPECT_EQ(c.front(), 1u);
    EXPECT_EQ(c.back(), 10000u);
    for (std::size_t i = 1; i < c.size(); ++i) EXPECT_LT(c[i - 1], c[i]);
    EXPECT_EQ(c.size(), 38u);
    EXPECT_EQ(checkpoints(5, 10, true), (std::vector<std::size_t>{1, 2, 3, 4, 5}));
}

TEST(Experiment, NyquistProbeIsRejected)
{
    const Experiment ex(parse_config(small_config(std::numbers::pi / 0.05)));
    EXPECT_FALSE(ex.check().ok());
    EXPECT_THROW(ex.run(), DomainError);
}

TEST(Experiment, DeterministicAcrossThreadCounts)
{
    const Experiment ex(parse_config(small_config()));
    const auto a = ex.run(true, 1), b = ex.run(true, 4);
    ASSERT_EQ(a.cells.size(), 2u);
    for (std::size_t c = 0; c < a.cells.size(); ++c) {
        ASSERT_EQ(a.cells[c].estimates.size(), b.cells[c].estimates.size());
        for (std::size_t k = 0; k < a.cells[c].estimates.size(); ++k)
            EXPECT_EQ(a.cells[c].estimates[k].phi_hat, b.cells[c].estimates[k].phi_hat);
        for (std::size_t k = 0; k < a.cells[c].fits.size(); ++k)
            EXPECT_EQ(a.cells[c].fits[k].fit.theta_hat.values, b.cells[c].fits[k].fit.theta_hat.values);
    }
    EXPECT_NE(a.cells[0].seed, a.cells[1].seed);
}

TEST(Experiment, TruthSumsOrderings)
{
    const Experiment ex(parse_config(small_config()));
    const CVector t = ex.truth({0});
    EXPECT_LT(std::abs(t(0) - Complex(-0.027027027027027025, -0.004504504504504504)), 1e-15);
}

TEST(Experiment, WritesOutputs)
{
    const auto cfg = parse_config(small_config());
    const Experiment ex(cfg);
    const auto r = ex.run(true);
    const auto dir = std::filesystem::temp_directory_path() / "qbnet_test_outputs";
    std::filesystem::remove_all(dir);
    write_outputs(dir, cfg, r);
    for (const char* f : {"nonparam.csv", "param.csv", "summary.json"})
        EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
    std::ifstream in(dir / "param.csv");
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "nd,sigma,replica,seed,set,theta1,theta2,residual_norm,jacobian_rcond,iterations,converged");
    const auto j = nlohmann::json::parse(std::ifstream(dir / "summary.json"));
    EXPECT_EQ(j["fits"].size(), 3u);
    std::filesystem::remove_all(dir);
}
