#include "svifit/cli.hpp"

#include "svifit/arbitrage.hpp"
#include "svifit/bs.hpp"
#include "svifit/calibration.hpp"
#include "svifit/errors.hpp"
#include "svifit/io.hpp"
#include "svifit/surface.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

namespace svifit::cli {

namespace {

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

struct Finding {
    double t;
    const char* kind;
    double value;
};

// Butterfly findings per slice plus calendar findings per adjacent pair. The
// calendar value is the larger of the crossedness and the worst total-order
// violation on a probe grid (an everywhere-decreasing pair never crosses, so
// crossedness alone would miss it).
std::vector<Finding> arbitrage_findings(const io::ParamsDocument& doc) {
    std::vector<Finding> findings;
    for (const auto& rec : doc.slices) {
        const auto report = arb::check_butterfly(rec.raw);
        if (!report.is_free)
            findings.push_back({rec.t, "butterfly", report.min_g});
    }
    for (std::size_t i = 0; i + 1 < doc.slices.size(); ++i) {
        const auto& lo = doc.slices[i];
        const auto& hi = doc.slices[i + 1];
        double violation = arb::crossedness(lo.raw, hi.raw);
        for (int j = 0; j <= 80; ++j) {
            const double k = -2.0 + 4.0 * j / 80.0;
            violation = std::max(violation, svi::total_variance(k, lo.raw) -
                                                svi::total_variance(k, hi.raw));
        }
        if (violation > 1e-12)
            findings.push_back({hi.t, "calendar", violation});
    }
    return findings;
}

std::size_t find_slice(const io::ParamsDocument& doc, double t) {
    for (std::size_t i = 0; i < doc.slices.size(); ++i) {
        if (std::abs(doc.slices[i].t - t) <= 1e-9 * std::max(1.0, std::abs(t)))
            return i;
    }
    throw Error("slice-not-found", "no slice at t = " + fmt(t));
}

void refresh_document(io::ParamsDocument& doc) {
    for (std::size_t i = 0; i < doc.slices.size(); ++i) {
        auto& rec = doc.slices[i];
        const auto report = arb::check_butterfly(rec.raw);
        rec.min_g = report.min_g;
        rec.butterfly_free = report.is_free;
        rec.crossedness_prev =
            i > 0 ? arb::crossedness(doc.slices[i - 1].raw, rec.raw) : 0.0;
        rec.crossedness_next =
            i + 1 < doc.slices.size() ? arb::crossedness(rec.raw, doc.slices[i + 1].raw) : 0.0;
    }
    doc.theta_samples.clear();
    for (const auto& rec : doc.slices)
        doc.theta_samples.emplace_back(rec.t, svi::total_variance(0.0, rec.raw));

    doc.has_long_end = false;
    const bool clean = arbitrage_findings(doc).empty();
    if (clean && !doc.slices.empty())
        io::attach_long_end(doc);
}

int cmd_fit(const std::string& quotes_path, const std::string& out_path, double penalty,
            const std::string& objective, std::uint64_t seed, const std::string& order,
            std::ostream& out) {
    const auto quotes = io::load_quotes(quotes_path);

    calib::FitConfig cfg;
    cfg.penalty_weight = penalty;
    cfg.objective =
        objective == "vol" ? calib::Objective::vol_sse : calib::Objective::price_sse;
    cfg.order = order == "rev" ? calib::FitOrder::reverse : calib::FitOrder::forward;
    cfg.seed = seed;

    const auto fits = calib::fit_surface(quotes, cfg);
    io::ParamsDocument doc = io::make_document(fits, quotes);

    bool clean = true;
    for (const auto& fit : fits) {
        clean = clean && fit.butterfly.is_free && fit.crossedness_prev <= 1e-12 &&
                fit.crossedness_next <= 1e-12;
    }
    if (clean) {
        std::vector<double> last_ks;
        for (const auto& pt : quotes.back().points)
            last_ks.push_back(pt.k);
        io::attach_long_end(doc, last_ks);
    }

    io::save_params(out_path, doc);
    for (std::size_t i = 0; i < fits.size(); ++i) {
        out << "slice=" << fmt(quotes[i].t) << " rmse=" << fmt(fits[i].rmse)
            << " crossedness=" << fmt(std::max(fits[i].crossedness_prev,
                                               fits[i].crossedness_next))
            << " min_g=" << fmt(fits[i].butterfly.min_g) << '\n';
    }
    return kExitOk;
}

int cmd_check_arb(const std::string& params_path, std::ostream& out) {
    const io::ParamsDocument doc = io::load_params(params_path);
    const auto findings = arbitrage_findings(doc);
    for (const auto& f : findings)
        out << "slice=" << fmt(f.t) << " kind=" << f.kind << " value=" << fmt(f.value) << '\n';
    return findings.empty() ? kExitOk : kExitArbitrage;
}

int cmd_repair(const std::string& params_path, double t, const std::string& mode,
               const std::string& out_path, std::ostream& out) {
    io::ParamsDocument doc = io::load_params(params_path);
    io::SliceRecord& rec = doc.slices[find_slice(doc, t)];
    const svi::JumpWingsParams before = rec.jw;

    svi::JumpWingsParams repaired = before;
    if (mode == "guaranteed") {
        repaired = calib::repair_butterfly_guaranteed(before);
    } else if (mode == "optimal") {
        repaired = calib::repair_butterfly_optimal(before, calib::sample_slice_quotes(before));
    } else {
        throw Error("usage", "mode must be guaranteed or optimal");
    }

    rec.jw = repaired;
    rec.raw = svi::jw_to_raw(repaired);
    rec.natural = svi::raw_to_natural(rec.raw);
    refresh_document(doc);
    io::save_params(out_path.empty() ? params_path : out_path, doc);

    out << "slice=" << fmt(t) << " c=" << fmt(before.c) << "->" << fmt(repaired.c)
        << " v_tilde=" << fmt(before.v_tilde) << "->" << fmt(repaired.v_tilde) << '\n';
    return kExitOk;
}

int cmd_query(const std::string& params_path, double k, double t, std::ostream& out) {
    const auto surface = io::surface_from_document(io::load_params(params_path));
    const auto result = surface.query(k, t);
    out << "w=" << fmt(result.total_variance) << " vol=" << fmt(result.vol)
        << " price=" << fmt(result.price) << " density=" << fmt(result.density) << '\n';
    return kExitOk;
}

int cmd_density(const std::string& params_path, double t, const std::string& out_path) {
    const auto surface = io::surface_from_document(io::load_params(params_path));
    std::ofstream csv(out_path);
    if (!csv)
        throw Error("io-error", "cannot write " + out_path);
    csv << "k,density\n";
    for (int i = 0; i <= 2000; ++i) {
        const double k = -5.0 + 10.0 * i / 2000.0;
        csv << fmt(k) << ',' << fmt(surface.query(k, t).density) << '\n';
    }
    return kExitOk;
}

int cmd_report(const std::string& params_path, const std::string& out_dir,
               const std::string& quotes_path, std::ostream& out) {
    const io::ParamsDocument doc = io::load_params(params_path);
    std::vector<calib::QuoteSlice> quotes;
    if (!quotes_path.empty())
        quotes = io::load_quotes(quotes_path);
    std::filesystem::create_directories(out_dir);

    for (std::size_t i = 0; i < doc.slices.size(); ++i) {
        const auto& rec = doc.slices[i];
        const calib::QuoteSlice* match = nullptr;
        for (const auto& q : quotes) {
            if (std::abs(q.t - rec.t) <= 1e-9 * std::max(1.0, rec.t))
                match = &q;
        }

        const std::string stem = out_dir + "/slice_" + std::to_string(i);
        {
            std::ofstream csv(stem + "_w.csv");
            if (!csv)
                throw Error("io-error", "cannot write " + stem + "_w.csv");
            if (match != nullptr) {
                csv << "k,w_fit,w_bid,w_ask\n";
                for (const auto& pt : match->points) {
                    csv << fmt(pt.k) << ',' << fmt(svi::total_variance(pt.k, rec.raw)) << ','
                        << fmt(pt.bid_vol * pt.bid_vol * rec.t) << ','
                        << fmt(pt.ask_vol * pt.ask_vol * rec.t) << '\n';
                }
            } else {
                csv << "k,w_fit\n";
                for (int j = 0; j <= 100; ++j) {
                    const double k = -1.5 + 3.0 * j / 100.0;
                    csv << fmt(k) << ',' << fmt(svi::total_variance(k, rec.raw)) << '\n';
                }
            }
        }
        {
            std::ofstream csv(stem + "_g.csv");
            if (!csv)
                throw Error("io-error", "cannot write " + stem + "_g.csv");
            csv << "k,g\n";
            const Slice slice = Slice::from_raw(rec.raw);
            const double half = 5.0 * (rec.raw.sigma + std::abs(rec.raw.m) + 1.0);
            for (int j = 0; j <= 500; ++j) {
                const double k = rec.raw.m - half + 2.0 * half * j / 500.0;
                csv << fmt(k) << ',' << fmt(arb::g(k, slice)) << '\n';
            }
        }
    }
    out << "wrote " << doc.slices.size() * 2 << " csv files to " << out_dir << '\n';
    return kExitOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"SVI volatility smile calibration with static-arbitrage control"};
    app.require_subcommand(1);

    std::string quotes_path, params_path, out_path, out_dir;
    double penalty = 1e6;
    std::string objective = "price";
    std::uint64_t seed = 0;
    std::string order = "fwd";
    double t = 0.0, k = 0.0;
    std::string mode = "guaranteed";
    std::string report_quotes;

    auto* fit = app.add_subcommand("fit", "calibrate SVI slices to a quote csv");
    fit->add_option("quotes", quotes_path, "quote csv")->required();
    fit->add_option("-o,--output", out_path, "params file to write")->required();
    fit->add_option("--penalty", penalty, "crossedness penalty weight");
    fit->add_option("--objective", objective, "price|vol")
        ->check(CLI::IsMember({"price", "vol"}));
    fit->add_option("--seed", seed, "optimizer seed");
    fit->add_option("--order", order, "fwd|rev slice order")
        ->check(CLI::IsMember({"fwd", "rev"}));

    auto* check = app.add_subcommand("check-arb", "scan a params file for static arbitrage");
    check->add_option("params", params_path, "params file")->required();

    auto* repair = app.add_subcommand("repair", "remove butterfly arbitrage from one slice");
    repair->add_option("params", params_path, "params file")->required();
    repair->add_option("--slice", t, "expiry of the slice to repair")->required();
    repair->add_option("--mode", mode, "guaranteed|optimal")
        ->check(CLI::IsMember({"guaranteed", "optimal"}));
    repair->add_option("-o,--output", out_path, "output params file (default: in place)");

    auto* query = app.add_subcommand("query", "evaluate the surface at (k, t)");
    query->add_option("params", params_path, "params file")->required();
    query->add_option("-k", k, "log-moneyness")->required();
    query->add_option("-t", t, "expiry in years")->required();

    auto* density = app.add_subcommand("density", "risk-neutral density at one expiry");
    density->add_option("params", params_path, "params file")->required();
    density->add_option("-t", t, "expiry in years")->required();
    density->add_option("-o,--output", out_path, "csv to write")->required();

    auto* report = app.add_subcommand("report", "per-slice fit and g csvs for plotting");
    report->add_option("params", params_path, "params file")->required();
    report->add_option("-o,--output", out_dir, "output directory")->required();
    report->add_option("--quotes", report_quotes, "quote csv for bid/ask columns");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        if (fit->parsed())
            return cmd_fit(quotes_path, out_path, penalty, objective, seed, order, out);
        if (check->parsed())
            return cmd_check_arb(params_path, out);
        if (repair->parsed())
            return cmd_repair(params_path, t, mode, out_path, out);
        if (query->parsed())
            return cmd_query(params_path, k, t, out);
        if (density->parsed())
            return cmd_density(params_path, t, out_path);
        if (report->parsed())
            return cmd_report(params_path, out_dir, report_quotes, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}

} // namespace svifit::cli
