#pragma once

#include "svifit/calibration.hpp"
#include "svifit/surface.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace svifit::io {

// One row of the quote CSV. Columns (with header, in order):
//   expiry_years,forward,strike,bid_vol,ask_vol
struct QuoteFileRow {
    double expiry_years;
    double forward;
    double strike;
    double bid_vol;
    double ask_vol;
};

// Parses the quote CSV into slices grouped by expiry, sorted ascending, with
// k = ln(strike/forward) and points sorted by k. Malformed rows and rows with
// bid_vol > ask_vol raise errors carrying the 1-based line number; duplicate
// (expiry, strike) pairs are rejected; a file without data rows raises
// "no-quotes".
std::vector<calib::QuoteSlice> load_quotes(const std::filesystem::path& path);

struct SliceRecord {
    double t;
    double forward;
    svi::RawSviParams raw;
    svi::NaturalSviParams natural;
    svi::JumpWingsParams jw;
    // fit diagnostics
    double rmse = 0.0;
    double crossedness_prev = 0.0;
    double crossedness_next = 0.0;
    double min_g = 0.0;
    bool butterfly_free = false;
};

struct ParamsDocument {
    static constexpr int kSchemaVersion = 1;

    int schema_version = kSchemaVersion;
    std::vector<SliceRecord> slices;
    std::vector<std::pair<double, double>> theta_samples;
    bool has_long_end = false;
    surface::LongEndRefit long_end;
};

// JSON document, value-exact on save/load roundtrip. save_params rejects
// records whose raw/natural/JW parameterizations disagree beyond 1e-9
// ("inconsistent-record"); load_params rejects unknown schema versions
// ("unsupported-schema").
void save_params(const std::filesystem::path& path, const ParamsDocument& doc);
ParamsDocument load_params(const std::filesystem::path& path);

// Assembles a document from fit results (record order follows the quotes).
ParamsDocument make_document(const std::vector<calib::FitResult>& fits,
                             std::span<const calib::QuoteSlice> quotes);

// Recomputes the long-end refit and attaches it (requires a clean fit).
void attach_long_end(ParamsDocument& doc, std::span<const double> fit_ks = {});

// Rebuilds the calibrated surface from a document; construction re-validates
// all arbitrage invariants. Requires has_long_end.
surface::CalibratedSurface surface_from_document(const ParamsDocument& doc);

} // namespace svifit::io
