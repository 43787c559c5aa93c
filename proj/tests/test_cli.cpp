#include "svifit/cli.hpp"

#include "svifit/bs.hpp"
#include "svifit/io.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

using namespace svifit;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        static int n = 0;
        path = std::filesystem::temp_directory_path() /
               ("svifit_cli_" + std::to_string(::getpid()) + "_" + std::to_string(n++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

int run_cli(const std::vector<std::string>& args, std::string* out_text = nullptr,
            std::string* err_text = nullptr) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    if (out_text != nullptr)
        *out_text = out.str();
    if (err_text != nullptr)
        *err_text = err.str();
    return code;
}

std::filesystem::path write_quotes_csv(const TempDir& dir,
                                       const std::vector<calib::QuoteSlice>& slices) {
    const auto path = dir.path / "quotes.csv";
    std::ofstream csv(path);
    csv << "expiry_years,forward,strike,bid_vol,ask_vol\n";
    csv.precision(17);
    for (const auto& slice : slices) {
        for (const auto& pt : slice.points) {
            csv << slice.t << ',' << slice.forward << ',' << slice.forward * std::exp(pt.k)
                << ',' << pt.bid_vol << ',' << pt.ask_vol << '\n';
        }
    }
    return path;
}

// A params file holding the Vogt slice between two clean ones would trip the
// calendar check as well; a single-slice document isolates the butterfly line.
std::filesystem::path write_vogt_params(const TempDir& dir) {
    const auto raw = test::vogt_params();
    io::ParamsDocument doc;
    doc.slices.push_back(io::SliceRecord{1.0, 100.0, raw, svi::raw_to_natural(raw),
                                         svi::raw_to_jw(raw, 1.0), 0.0, 0.0, 0.0, -0.0328,
                                         false});
    doc.theta_samples.emplace_back(1.0, svi::total_variance(0.0, raw));
    const auto path = dir.path / "vogt.json";
    io::save_params(path, doc);
    return path;
}

} // namespace

TEST_CASE("cli: usage errors exit with 1, help with 0") {
    CHECK(run_cli({}) == cli::kExitError);
    CHECK(run_cli({"frobnicate"}) == cli::kExitError);
    CHECK(run_cli({"fit"}) == cli::kExitError); // missing required options
    std::string out;
    CHECK(run_cli({"--help"}, &out) == cli::kExitOk);
    CHECK(out.find("fit") != std::string::npos);
}

TEST_CASE("cli: fit -> check-arb -> query pipeline on synthetic quotes") {
    TempDir dir;
    const ssvi::SsviSurface truth(-0.6, ssvi::PhiFamily::bounded_power_law(1.2, 0.5),
                                  ssvi::ThetaCurve::power_of_time(0.2));
    const auto quotes = test::ssvi_quotes(truth, {0.25, 0.5, 1.0, 2.0}, 11);
    const auto quotes_path = write_quotes_csv(dir, quotes);
    const auto params_path = (dir.path / "params.json").string();

    std::string out;
    REQUIRE(run_cli({"fit", quotes_path.string(), "-o", params_path, "--seed", "7"}, &out) ==
            cli::kExitOk);
    CHECK(out.find("crossedness=0 ") != std::string::npos);

    // clean fit: no findings, exit 0, silent stdout
    out.clear();
    CHECK(run_cli({"check-arb", params_path}, &out) == cli::kExitOk);
    CHECK(out.empty());

    // query at a calibrated expiry returns the calibrated ATM vol
    const auto doc = io::load_params(params_path);
    const double atm_vol = std::sqrt(svi::total_variance(0.0, doc.slices[1].raw) / 0.5);
    out.clear();
    REQUIRE(run_cli({"query", params_path, "-k", "0", "-t", "0.5"}, &out) == cli::kExitOk);
    std::istringstream fields(out);
    std::string token;
    double vol = 0.0;
    while (fields >> token) {
        if (token.rfind("vol=", 0) == 0)
            vol = std::stod(token.substr(4));
    }
    CHECK(std::abs(vol - atm_vol) <= 1e-10);

    // density csv
    const auto density_path = (dir.path / "density.csv").string();
    REQUIRE(run_cli({"density", params_path, "-t", "0.7", "-o", density_path}) == cli::kExitOk);
    std::ifstream density_csv(density_path);
    std::string header;
    std::getline(density_csv, header);
    CHECK(header == "k,density");

    // report csvs (with quotes: 4 columns)
    const auto report_dir = (dir.path / "report").string();
    REQUIRE(run_cli({"report", params_path, "-o", report_dir, "--quotes",
                     quotes_path.string()}) == cli::kExitOk);
    std::ifstream w_csv(report_dir + "/slice_0_w.csv");
    REQUIRE(w_csv.good());
    std::getline(w_csv, header);
    CHECK(header == "k,w_fit,w_bid,w_ask");
    std::ifstream g_csv(report_dir + "/slice_0_g.csv");
    REQUIRE(g_csv.good());
    std::getline(g_csv, header);
    CHECK(header == "k,g");
    // accepted surface: every emitted g value is non-negative
    std::string line;
    while (std::getline(g_csv, line)) {
        const auto comma = line.find(',');
        REQUIRE(comma != std::string::npos);
        CHECK(std::stod(line.substr(comma + 1)) >= -1e-12);
    }
}

TEST_CASE("cli: check-arb flags the Vogt slice with exit code 2") {
    TempDir dir;
    const auto params_path = write_vogt_params(dir);

    std::string out;
    CHECK(run_cli({"check-arb", params_path.string()}, &out) == cli::kExitArbitrage);
    CHECK(out.find("kind=butterfly") != std::string::npos);
    CHECK(out.find("slice=1") != std::string::npos);
}

TEST_CASE("cli: repair fixes the Vogt slice in guaranteed and optimal modes") {
    for (const std::string mode : {"guaranteed", "optimal"}) {
        TempDir dir;
        const auto params_path = write_vogt_params(dir);
        const auto out_path = (dir.path / "repaired.json").string();

        std::string out;
        REQUIRE(run_cli({"repair", params_path.string(), "--slice", "1.0", "--mode", mode, "-o",
                         out_path},
                        &out) == cli::kExitOk);
        CHECK(run_cli({"check-arb", out_path}) == cli::kExitOk);

        const auto doc = io::load_params(out_path);
        REQUIRE(doc.slices.size() == 1);
        CHECK(doc.slices[0].butterfly_free);
        CHECK(doc.slices[0].jw.c < 1.316799);
        if (mode == "guaranteed")
            CHECK(doc.slices[0].jw.c == doctest::Approx(0.3493158).epsilon(1e-6));
        CHECK(doc.has_long_end); // repaired single-slice document is clean
    }
}

TEST_CASE("cli: check-arb reports calendar findings") {
    TempDir dir;
    // slice at t=1 sits strictly above the slice at t=2
    const ssvi::SsviSurface truth(-0.5, ssvi::PhiFamily::bounded_power_law(1.1, 0.5),
                                  ssvi::ThetaCurve::power_of_time(0.2));
    const auto hi = ssvi::slice_raw(truth.theta(2.0), truth);
    const auto lo = ssvi::slice_raw(truth.theta(1.0), truth);
    io::ParamsDocument doc;
    for (const auto* raw : {&hi, &lo}) {
        const double t = raw == &hi ? 1.0 : 2.0;
        doc.slices.push_back(io::SliceRecord{t, 100.0, *raw, svi::raw_to_natural(*raw),
                                             svi::raw_to_jw(*raw, t), 0.0, 0.0, 0.0, 0.0,
                                             true});
        doc.theta_samples.emplace_back(t, svi::total_variance(0.0, *raw));
    }
    const auto path = (dir.path / "swapped.json").string();
    io::save_params(path, doc);

    std::string out;
    CHECK(run_cli({"check-arb", path}, &out) == cli::kExitArbitrage);
    CHECK(out.find("kind=calendar") != std::string::npos);
}

TEST_CASE("cli: report without quotes emits fit-only columns") {
    TempDir dir;
    const ssvi::SsviSurface truth(-0.6, ssvi::PhiFamily::bounded_power_law(1.2, 0.5),
                                  ssvi::ThetaCurve::power_of_time(0.2));
    const auto quotes = test::ssvi_quotes(truth, {0.5, 1.0}, 9);
    const auto quotes_path = write_quotes_csv(dir, quotes);
    const auto params_path = (dir.path / "params.json").string();
    REQUIRE(run_cli({"fit", quotes_path.string(), "-o", params_path}) == cli::kExitOk);

    const auto report_dir = (dir.path / "bare").string();
    REQUIRE(run_cli({"report", params_path, "-o", report_dir}) == cli::kExitOk);
    std::ifstream w_csv(report_dir + "/slice_1_w.csv");
    REQUIRE(w_csv.good());
    std::string header;
    std::getline(w_csv, header);
    CHECK(header == "k,w_fit");
}

TEST_CASE("cli: io failures exit with 1") {
    TempDir dir;
    CHECK(run_cli({"check-arb", (dir.path / "missing.json").string()}) == cli::kExitError);
    const auto bogus = dir.path / "bogus.csv";
    std::ofstream(bogus) << "not,a,quote,file\n";
    CHECK(run_cli({"fit", bogus.string(), "-o", (dir.path / "out.json").string()}) ==
          cli::kExitError);
}

TEST_CASE("cli: fit is deterministic given a seed") {
    TempDir dir;
    const ssvi::SsviSurface truth(-0.5, ssvi::PhiFamily::power_law(1.0, 0.5),
                                  ssvi::ThetaCurve::power_of_time(0.22));
    const auto quotes = test::ssvi_quotes(truth, {0.5, 1.0}, 9);
    const auto quotes_path = write_quotes_csv(dir, quotes);
    const auto p1 = (dir.path / "p1.json").string();
    const auto p2 = (dir.path / "p2.json").string();

    REQUIRE(run_cli({"fit", quotes_path.string(), "-o", p1, "--seed", "42"}) == cli::kExitOk);
    REQUIRE(run_cli({"fit", quotes_path.string(), "-o", p2, "--seed", "42"}) == cli::kExitOk);

    std::ifstream f1(p1), f2(p2);
    const std::string s1((std::istreambuf_iterator<char>(f1)),
                         std::istreambuf_iterator<char>());
    const std::string s2((std::istreambuf_iterator<char>(f2)),
                         std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
}
