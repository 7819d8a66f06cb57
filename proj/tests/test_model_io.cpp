#include <doctest.h>

#include <fstream>
#include <random>

#include "healthwatch/error.hpp"
#include "healthwatch/model_io.hpp"
#include "support.hpp"

using namespace healthwatch;

namespace {

ForecastModel model(int horizon, std::uint64_t seed) {
    Hyperparams h;
    h.horizon = horizon;
    h.anomaly_threshold = 0.35;
    auto m = ForecastModel::initialize(h, seed);
    m.regression.irregularity_weight = -0.123456789;
    m.regression.irregularity_bias = 1e-300;
    return m;
}

std::string read_all(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void write_all(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << bytes;
}

} // namespace

TEST_CASE("save then load is bit exact and forecasts agree") {
    testing::TempDir dir;
    const auto m = model(28, 3);
    save_model(dir / "m.bin", m);
    const auto back = load_model(dir / "m.bin");
    CHECK(back == m);
    CHECK(serialize_models(std::vector{back}) == serialize_models(std::vector{m}));

    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    for (int i = 0; i < 100; ++i) {
        DetectionWindow w;
        w.status = WindowStatus::valid;
        for (int k = 0; k < 28; ++k) w.history.push_back(g(rng));
        w.observed = g(rng);
        w.seasonality[i % 7] = 1.0;
        const auto a = detect_point(w, m);
        const auto b = detect_point(w, back);
        CHECK(a->forecast.baseline == b->forecast.baseline);
        CHECK(a->forecast.lower == b->forecast.lower);
        CHECK(a->anomaly_probability == b->anomaly_probability);
    }
}

TEST_CASE("bundles hold one model per horizon") {
    testing::TempDir dir;
    const std::vector<ForecastModel> models{model(14, 1), model(28, 2)};
    save_models(dir / "b.bin", models);
    CHECK(load_models(dir / "b.bin") == models);
    CHECK_THROWS_AS(load_model(dir / "b.bin"), ModelFormatError);
}

TEST_CASE("corrupt files are rejected") {
    testing::TempDir dir;
    save_model(dir / "m.bin", model(28, 3));
    const auto bytes = read_all(dir / "m.bin");

    SUBCASE("truncated") {
        write_all(dir / "t.bin", bytes.substr(0, bytes.size() / 2));
        CHECK_THROWS_WITH_AS(load_model(dir / "t.bin"), doctest::Contains("truncated"), ModelFormatError);
    }
    SUBCASE("unknown version") {
        auto v = bytes;
        v[4] = 7;
        write_all(dir / "v.bin", v);
        CHECK_THROWS_WITH_AS(load_model(dir / "v.bin"), doctest::Contains("version 7"), ModelFormatError);
    }
    SUBCASE("flipped weight bit") {
        auto f = bytes;
        f[bytes.size() / 2] ^= 0x01;
        write_all(dir / "f.bin", f);
        CHECK_THROWS_AS(load_model(dir / "f.bin"), ModelFormatError);
    }
    SUBCASE("bad magic") {
        write_all(dir / "x.bin", "not a model file at all");
        CHECK_THROWS_AS(load_model(dir / "x.bin"), ModelFormatError);
    }
    SUBCASE("trailing bytes") {
        write_all(dir / "e.bin", bytes + "x");
        CHECK_THROWS_AS(load_model(dir / "e.bin"), ModelFormatError);
    }
    CHECK_THROWS_AS(load_model(dir / "missing.bin"), DataError);
}
