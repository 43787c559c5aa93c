#include "svifit/io.hpp"

#include "svifit/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace svifit::io {

namespace {

using nlohmann::json;

std::string trim(std::string_view s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string_view::npos)
        return {};
    const auto end = s.find_last_not_of(" \t\r");
    return std::string(s.substr(begin, end - begin + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(trim(std::string_view(line).substr(start)));
            break;
        }
        fields.push_back(trim(std::string_view(line).substr(start, comma - start)));
        start = comma + 1;
    }
    return fields;
}

double parse_number(const std::string& field, std::size_t line_no, const char* column) {
    double value = 0.0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end || !std::isfinite(value))
        throw Error("parse-error", "line " + std::to_string(line_no) + ": bad " + column +
                                       " value '" + field + "'");
    return value;
}

constexpr const char* kQuoteHeader = "expiry_years,forward,strike,bid_vol,ask_vol";

bool close_fields(double lhs, double rhs) {
    return std::abs(lhs - rhs) <= 1e-9 * std::max(1.0, std::max(std::abs(lhs), std::abs(rhs)));
}

json raw_to_json(const svi::RawSviParams& p) {
    return json{{"a", p.a}, {"b", p.b}, {"rho", p.rho}, {"m", p.m}, {"sigma", p.sigma}};
}

json natural_to_json(const svi::NaturalSviParams& p) {
    return json{
        {"delta", p.delta}, {"mu", p.mu}, {"rho", p.rho}, {"omega", p.omega}, {"zeta", p.zeta}};
}

json jw_to_json(const svi::JumpWingsParams& p) {
    return json{{"t", p.t},   {"v", p.v}, {"psi", p.psi},
                {"p", p.p},   {"c", p.c}, {"v_tilde", p.v_tilde}};
}

} // namespace

std::vector<calib::QuoteSlice> load_quotes(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw Error("io-error", "cannot open " + path.string());

    std::string line;
    std::size_t line_no = 0;

    // header
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty())
            continue;
        if (t != kQuoteHeader)
            throw Error("parse-error", "line " + std::to_string(line_no) +
                                           ": expected header '" + kQuoteHeader + "'");
        have_header = true;
        break;
    }
    if (!have_header)
        throw Error("no-quotes", path.string() + " is empty");

    std::map<double, calib::QuoteSlice> by_expiry;
    std::map<std::pair<double, double>, std::size_t> seen; // (expiry, strike) -> line
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty())
            continue;
        const auto fields = split_fields(line);
        if (fields.size() != 5)
            throw Error("parse-error",
                        "line " + std::to_string(line_no) + ": expected 5 fields, got " +
                            std::to_string(fields.size()));
        QuoteFileRow row{};
        row.expiry_years = parse_number(fields[0], line_no, "expiry_years");
        row.forward = parse_number(fields[1], line_no, "forward");
        row.strike = parse_number(fields[2], line_no, "strike");
        row.bid_vol = parse_number(fields[3], line_no, "bid_vol");
        row.ask_vol = parse_number(fields[4], line_no, "ask_vol");
        if (!(row.expiry_years > 0.0 && row.forward > 0.0 && row.strike > 0.0 &&
              row.bid_vol > 0.0 && row.ask_vol > 0.0))
            throw Error("parse-error",
                        "line " + std::to_string(line_no) + ": all values must be positive");
        if (row.bid_vol > row.ask_vol)
            throw Error("crossed-quotes",
                        "line " + std::to_string(line_no) + ": bid_vol above ask_vol");
        if (const auto [it, inserted] =
                seen.emplace(std::make_pair(row.expiry_years, row.strike), line_no);
            !inserted)
            throw Error("duplicate-quote", "line " + std::to_string(line_no) +
                                               ": duplicate (expiry, strike), first at line " +
                                               std::to_string(it->second));
        auto& slice = by_expiry[row.expiry_years];
        if (slice.points.empty()) {
            slice.t = row.expiry_years;
            slice.forward = row.forward;
        } else if (slice.forward != row.forward) {
            throw Error("parse-error", "line " + std::to_string(line_no) +
                                           ": forward differs within one expiry");
        }
        slice.points.push_back(calib::QuotePoint{std::log(row.strike / row.forward), row.bid_vol,
                                                 row.ask_vol});
        ++rows;
    }
    if (rows == 0)
        throw Error("no-quotes", path.string() + " has no data rows");

    std::vector<calib::QuoteSlice> slices;
    slices.reserve(by_expiry.size());
    for (auto& [t, slice] : by_expiry) {
        std::sort(slice.points.begin(), slice.points.end(),
                  [](const auto& lhs, const auto& rhs) { return lhs.k < rhs.k; });
        slices.push_back(std::move(slice));
    }
    return slices;
}

void save_params(const std::filesystem::path& path, const ParamsDocument& doc) {
    json slices = json::array();
    for (const auto& rec : doc.slices) {
        // The three parameterizations must agree before anything is persisted.
        const svi::RawSviParams from_natural = svi::natural_to_raw(rec.natural);
        svi::RawSviParams from_jw = rec.raw;
        try {
            from_jw = svi::jw_to_raw(rec.jw);
        } catch (const Error&) {
            throw Error("inconsistent-record",
                        "jw parameters at t = " + std::to_string(rec.t) + " are not invertible");
        }
        const auto consistent = [&](const svi::RawSviParams& other) {
            return close_fields(rec.raw.a, other.a) && close_fields(rec.raw.b, other.b) &&
                   close_fields(rec.raw.rho, other.rho) && close_fields(rec.raw.m, other.m) &&
                   close_fields(rec.raw.sigma, other.sigma);
        };
        if (!consistent(from_natural) || !consistent(from_jw))
            throw Error("inconsistent-record",
                        "parameterizations at t = " + std::to_string(rec.t) + " disagree");

        slices.push_back(json{{"t", rec.t},
                              {"forward", rec.forward},
                              {"raw", raw_to_json(rec.raw)},
                              {"natural", natural_to_json(rec.natural)},
                              {"jw", jw_to_json(rec.jw)},
                              {"diagnostics",
                               json{{"rmse", rec.rmse},
                                    {"crossedness_prev", rec.crossedness_prev},
                                    {"crossedness_next", rec.crossedness_next},
                                    {"min_g", rec.min_g},
                                    {"butterfly_free", rec.butterfly_free}}}});
    }

    json root{{"schema_version", doc.schema_version}, {"slices", std::move(slices)}};
    json theta = json::array();
    for (const auto& [t, th] : doc.theta_samples)
        theta.push_back(json::array({t, th}));
    root["theta"] = std::move(theta);
    if (doc.has_long_end) {
        root["long_end"] = json{{"rho", doc.long_end.rho},
                                {"phi", doc.long_end.phi},
                                {"theta_n", doc.long_end.theta_n},
                                {"lift", doc.long_end.lift}};
    } else {
        root["long_end"] = nullptr;
    }

    std::ofstream out(path);
    if (!out)
        throw Error("io-error", "cannot write " + path.string());
    out << root.dump(2) << '\n';
    if (!out)
        throw Error("io-error", "failed writing " + path.string());
}

ParamsDocument load_params(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw Error("io-error", "cannot open " + path.string());
    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw Error("parse-error", path.string() + ": " + e.what());
    }

    try {
        if (!root.contains("schema_version") ||
            root["schema_version"].get<int>() != ParamsDocument::kSchemaVersion)
            throw Error("unsupported-schema", "expected schema_version " +
                                                  std::to_string(ParamsDocument::kSchemaVersion));
        ParamsDocument doc;
        for (const auto& s : root.at("slices")) {
            const auto& raw = s.at("raw");
            const auto& nat = s.at("natural");
            const auto& jw = s.at("jw");
            const auto& diag = s.at("diagnostics");
            doc.slices.push_back(SliceRecord{
                s.at("t").get<double>(),
                s.at("forward").get<double>(),
                svi::RawSviParams(raw.at("a").get<double>(), raw.at("b").get<double>(),
                                  raw.at("rho").get<double>(), raw.at("m").get<double>(),
                                  raw.at("sigma").get<double>()),
                svi::NaturalSviParams(nat.at("delta").get<double>(), nat.at("mu").get<double>(),
                                      nat.at("rho").get<double>(), nat.at("omega").get<double>(),
                                      nat.at("zeta").get<double>()),
                svi::JumpWingsParams(jw.at("t").get<double>(), jw.at("v").get<double>(),
                                     jw.at("psi").get<double>(), jw.at("p").get<double>(),
                                     jw.at("c").get<double>(), jw.at("v_tilde").get<double>()),
                diag.at("rmse").get<double>(),
                diag.at("crossedness_prev").get<double>(),
                diag.at("crossedness_next").get<double>(),
                diag.at("min_g").get<double>(),
                diag.at("butterfly_free").get<bool>(),
            });
        }
        for (const auto& pair : root.at("theta"))
            doc.theta_samples.emplace_back(pair.at(0).get<double>(), pair.at(1).get<double>());
        if (!root.at("long_end").is_null()) {
            const auto& le = root.at("long_end");
            doc.has_long_end = true;
            doc.long_end = surface::LongEndRefit{le.at("rho").get<double>(),
                                                 le.at("phi").get<double>(),
                                                 le.at("theta_n").get<double>(),
                                                 le.at("lift").get<double>()};
        }
        return doc;
    } catch (const json::exception& e) {
        throw Error("parse-error", path.string() + ": " + e.what());
    }
}

ParamsDocument make_document(const std::vector<calib::FitResult>& fits,
                             std::span<const calib::QuoteSlice> quotes) {
    if (fits.size() != quotes.size())
        throw Error("invalid-document", "fit results and quote slices differ in count");
    ParamsDocument doc;
    for (std::size_t i = 0; i < fits.size(); ++i) {
        const auto& fit = fits[i];
        SliceRecord rec{
            quotes[i].t,
            quotes[i].forward,
            fit.params,
            svi::raw_to_natural(fit.params),
            svi::raw_to_jw(fit.params, quotes[i].t),
            fit.rmse,
            fit.crossedness_prev,
            fit.crossedness_next,
            fit.butterfly.min_g,
            fit.butterfly.is_free,
        };
        doc.slices.push_back(std::move(rec));
        doc.theta_samples.emplace_back(quotes[i].t, svi::total_variance(0.0, fit.params));
    }
    return doc;
}

void attach_long_end(ParamsDocument& doc, std::span<const double> fit_ks) {
    if (doc.slices.empty())
        throw Error("invalid-document", "no slices to refit");
    const auto& last = doc.slices.back();
    doc.long_end = surface::refit_long_end(
        surface::SurfaceSlice{last.t, last.raw, last.forward}, fit_ks);
    doc.has_long_end = true;
}

surface::CalibratedSurface surface_from_document(const ParamsDocument& doc) {
    if (!doc.has_long_end)
        throw Error("invalid-document", "document has no long-end record");
    std::vector<surface::SurfaceSlice> slices;
    slices.reserve(doc.slices.size());
    for (const auto& rec : doc.slices)
        slices.push_back(surface::SurfaceSlice{rec.t, rec.raw, rec.forward});
    return surface::CalibratedSurface::build_with_long_end(std::move(slices), doc.long_end);
}

} // namespace svifit::io
