#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dualcast/calendar.hpp"
#include "dualcast/common.hpp"

namespace dualcast {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return !std::isfinite(v); }

// ---------------------------------------------------------------------------
// Raw panel
// ---------------------------------------------------------------------------

// A dated panel of raw series plus one stationarity transformation code per
// series. Missing values are allowed at the edges only; interior gaps are
// rejected when the supervised matrix is built.
struct RawPanel {
  std::vector<Date> dates;
  std::vector<std::string> names;
  Matrix values;            // T x M, NaN = missing
  std::vector<int> tcodes;  // per series, in {1..7}

  Index rows() const { return values.rows(); }
  Index series() const { return values.cols(); }

  Index series_index(const std::string& name) const {
    for (std::size_t m = 0; m < names.size(); ++m)
      if (names[m] == name) return static_cast<Index>(m);
    fail("panel has no series named '" + name + "'");
  }
};

// ---------------------------------------------------------------------------
// Stationarity transformations (FRED convention)
//
//   1 level          2 first difference      3 second difference
//   4 log            5 log first difference  6 log second difference
//   7 difference of the period-over-period percent change
//
// Entries consumed by differencing come back as NaN at the head of the
// series, to be trimmed during row alignment.
// ---------------------------------------------------------------------------

inline Vector apply_tcode(const Vector& x, int code,
                          const std::string& name = "") {
  const auto where = name.empty() ? std::string() : (" in series '" + name + "'");
  require(code >= 1 && code <= 7,
          "unknown transformation code " + std::to_string(code) + where);
  const Index n = x.size();
  Vector out = Vector::Constant(n, kMissing);

  const auto log_at = [&](Index t) {
    require(is_missing(x[t]) || x[t] > 0.0,
            "non-positive value under a log transformation code" + where);
    return std::log(x[t]);
  };

  switch (code) {
    case 1:
      out = x;
      break;
    case 2:
      for (Index t = 1; t < n; ++t) out[t] = x[t] - x[t - 1];
      break;
    case 3:
      for (Index t = 2; t < n; ++t) out[t] = x[t] - 2.0 * x[t - 1] + x[t - 2];
      break;
    case 4:
      for (Index t = 0; t < n; ++t) out[t] = log_at(t);
      break;
    case 5:
      for (Index t = 1; t < n; ++t) out[t] = log_at(t) - log_at(t - 1);
      break;
    case 6:
      for (Index t = 2; t < n; ++t)
        out[t] = log_at(t) - 2.0 * log_at(t - 1) + log_at(t - 2);
      break;
    case 7:
      for (Index t = 2; t < n; ++t) {
        const double g1 = x[t] / x[t - 1] - 1.0;
        const double g0 = x[t - 1] / x[t - 2] - 1.0;
        out[t] = g1 - g0;
      }
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' '))
      field.pop_back();
    std::size_t b = 0;
    while (b < field.size() && field[b] == ' ') ++b;
    out.push_back(field.substr(b));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

inline bool blank_line(const std::string& line) {
  for (char c : line)
    if (c != ',' && c != ' ' && c != '\r' && c != '\t') return false;
  return true;
}

}  // namespace detail

// Loads a FRED-MD/QD style file: header row with series names (first column
// is the date column), one designated row holding integer transformation
// codes, and data rows below. Rows between the header and the tcode row are
// treated as metadata and skipped (FRED-QD carries an extra "factors" row).
// `tcode_row` is 1-based counting the header as row 1.
inline RawPanel load_fred_csv(const std::string& path, int tcode_row = 2) {
  std::ifstream in(path);
  require(in.good(), "cannot open '" + path + "'");
  require(tcode_row >= 2, "tcode_row must be >= 2 (row 1 is the header)");

  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (detail::blank_line(line)) continue;
    rows.push_back(detail::split_csv_line(line));
  }
  require(rows.size() > static_cast<std::size_t>(tcode_row),
          "file has no data rows below the tcode row");

  const auto& header = rows[0];
  require(header.size() >= 2, "need a date column plus at least one series");
  const std::size_t width = header.size();

  RawPanel panel;
  panel.names.assign(header.begin() + 1, header.end());

  const auto& code_cells = rows[static_cast<std::size_t>(tcode_row - 1)];
  require(code_cells.size() == width,
          "tcode row has " + std::to_string(code_cells.size()) +
              " fields, expected " + std::to_string(width));
  for (std::size_t m = 1; m < width; ++m) {
    int code = 0;
    require(detail::parse_int(code_cells[m], code),
            "non-integer transformation code '" + code_cells[m] + "'");
    require(code >= 1 && code <= 7,
            "unknown transformation code " + code_cells[m]);
    panel.tcodes.push_back(code);
  }

  std::vector<std::vector<std::string>> data(
      rows.begin() + tcode_row, rows.end());
  panel.values.resize(static_cast<Index>(data.size()),
                      static_cast<Index>(width - 1));
  for (std::size_t r = 0; r < data.size(); ++r) {
    require(data[r].size() == width,
            "ragged row " + std::to_string(r + tcode_row + 1) + ": " +
                std::to_string(data[r].size()) + " fields, expected " +
                std::to_string(width));
    panel.dates.push_back(Date::parse(data[r][0]));
    for (std::size_t m = 1; m < width; ++m) {
      const std::string& cell = data[r][m];
      if (cell.empty() || cell == "NA" || cell == "nan" || cell == "NaN") {
        panel.values(static_cast<Index>(r), static_cast<Index>(m - 1)) =
            kMissing;
      } else {
        try {
          panel.values(static_cast<Index>(r), static_cast<Index>(m - 1)) =
              std::stod(cell);
        } catch (const std::exception&) {
          fail("cannot parse value '" + cell + "' in row " +
               std::to_string(r + tcode_row + 1));
        }
      }
    }
  }
  for (std::size_t r = 1; r < panel.dates.size(); ++r)
    require(panel.dates[r - 1] < panel.dates[r],
            "dates must be strictly increasing (row " + std::to_string(r) +
                ")");
  return panel;
}

// ---------------------------------------------------------------------------
// Supervised dataset
// ---------------------------------------------------------------------------

// Feature matrix with aligned direct-forecast target. Row t is stamped with
// its forecast origin date; every feature in that row is observable at the
// origin, and y[t] is the transformed target realized `horizon` periods
// later. Lag k of a variable holds its k-th most recent observed value at
// the origin (lag 1 = the value dated at the origin itself).
struct TimeSeriesDataset {
  std::vector<Date> dates;  // forecast origin per row
  Matrix X;                 // N x P
  Vector y;                 // N
  std::vector<std::string> feature_names;
  std::string target;
  int horizon = 1;
  Frequency frequency = Frequency::quarterly;

  Index n_rows() const { return X.rows(); }
  Index n_features() const { return X.cols(); }

  Date target_date(Index row) const {
    return dates[static_cast<std::size_t>(row)].plus_periods(frequency,
                                                             horizon);
  }

  Index feature_index(const std::string& name) const {
    for (std::size_t p = 0; p < feature_names.size(); ++p)
      if (feature_names[p] == name) return static_cast<Index>(p);
    fail("dataset has no feature named '" + name + "'");
  }
};

namespace detail {

// Verifies NaNs form leading/trailing edge runs only.
inline void check_edge_missing_only(const Vector& v, const std::string& name) {
  Index first = v.size(), last = -1;
  for (Index t = 0; t < v.size(); ++t) {
    if (!is_missing(v[t])) {
      if (first == v.size()) first = t;
      last = t;
    }
  }
  require(last >= first, "series '" + name + "' has no observed values");
  for (Index t = first; t <= last; ++t)
    require(!is_missing(v[t]),
            "interior missing value in series '" + name + "'");
}

}  // namespace detail

// Builds lag and MARX feature blocks from the transformed panel and aligns
// the target h steps ahead. MARX features are trailing moving averages of
// the transformed series (orders given in `marx_orders`).
inline TimeSeriesDataset build_supervised(const RawPanel& panel,
                                          const std::string& target, int h,
                                          int lags,
                                          const std::vector<int>& marx_orders,
                                          Frequency freq = Frequency::quarterly) {
  require(h >= 1, "horizon must be >= 1");
  require(lags >= 1, "lags must be >= 1");
  for (int m : marx_orders) require(m >= 1, "MARX order must be >= 1");
  require(static_cast<std::size_t>(panel.series()) == panel.tcodes.size(),
          "panel has " + std::to_string(panel.series()) + " series but " +
              std::to_string(panel.tcodes.size()) + " tcodes");
  const Index target_col = panel.series_index(target);
  const Index t_count = panel.rows();

  Matrix transformed(t_count, panel.series());
  for (Index m = 0; m < panel.series(); ++m) {
    transformed.col(m) = apply_tcode(
        panel.values.col(m), panel.tcodes[static_cast<std::size_t>(m)],
        panel.names[static_cast<std::size_t>(m)]);
    detail::check_edge_missing_only(transformed.col(m),
                                    panel.names[static_cast<std::size_t>(m)]);
  }

  const Index p_per_var = lags + static_cast<Index>(marx_orders.size());
  const Index p_total = p_per_var * panel.series();

  TimeSeriesDataset ds;
  ds.target = target;
  ds.horizon = h;
  ds.frequency = freq;
  ds.feature_names.reserve(static_cast<std::size_t>(p_total));
  for (Index m = 0; m < panel.series(); ++m) {
    const auto& base = panel.names[static_cast<std::size_t>(m)];
    for (int k = 1; k <= lags; ++k)
      ds.feature_names.push_back(base + ".L" + std::to_string(k));
    for (int q : marx_orders)
      ds.feature_names.push_back(base + ".MA" + std::to_string(q));
  }

  std::vector<Index> usable;
  Matrix x_full(t_count, p_total);
  Vector y_full = Vector::Constant(t_count, kMissing);
  for (Index t = 0; t < t_count; ++t) {
    Index col = 0;
    bool ok = true;
    for (Index m = 0; m < panel.series() && ok; ++m) {
      for (int k = 1; k <= lags; ++k) {
        const Index src = t - (k - 1);
        const double v = src >= 0 ? transformed(src, m) : kMissing;
        x_full(t, col++) = v;
        if (is_missing(v)) ok = false;
      }
      for (int q : marx_orders) {
        double acc = 0.0;
        bool have = t - (q - 1) >= 0;
        for (int u = 0; u < q && have; ++u) {
          const double v = transformed(t - u, m);
          if (is_missing(v))
            have = false;
          else
            acc += v;
        }
        const double v = have ? acc / q : kMissing;
        x_full(t, col++) = v;
        if (is_missing(v)) ok = false;
      }
    }
    if (t + h < t_count) {
      y_full[t] = transformed(t + h, target_col);
    }
    if (ok && !is_missing(y_full[t])) usable.push_back(t);
  }
  require(usable.size() >= 2,
          "fewer than 2 usable rows after transformation and alignment");

  const Index n = static_cast<Index>(usable.size());
  ds.X.resize(n, p_total);
  ds.y.resize(n);
  ds.dates.reserve(usable.size());
  for (Index r = 0; r < n; ++r) {
    const Index t = usable[static_cast<std::size_t>(r)];
    ds.X.row(r) = x_full.row(t);
    ds.y[r] = y_full[t];
    ds.dates.push_back(panel.dates[static_cast<std::size_t>(t)]);
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

// Per-column moments used to (de)standardize. Standard deviations are the
// sample convention (divide by N-1); zero-variance columns are dropped and
// listed here by name.
struct StandardizationStats {
  std::vector<std::string> feature_names;  // retained columns
  Vector x_mean;
  Vector x_std;
  double y_mean = 0.0;
  double y_std = 1.0;
  std::vector<std::string> dropped;

  Matrix apply(const Matrix& x_raw,
               const std::vector<Index>& kept_cols) const {
    Matrix out(x_raw.rows(), static_cast<Index>(kept_cols.size()));
    for (std::size_t j = 0; j < kept_cols.size(); ++j)
      out.col(static_cast<Index>(j)) =
          (x_raw.col(kept_cols[j]).array() - x_mean[static_cast<Index>(j)]) /
          x_std[static_cast<Index>(j)];
    return out;
  }

  double destandardize_y(double y_std_scale) const {
    return y_std_scale * y_std + y_mean;
  }
  double standardize_y(double y_raw) const { return (y_raw - y_mean) / y_std; }
};

struct StandardizedDataset {
  TimeSeriesDataset dataset;
  StandardizationStats stats;
  std::vector<Index> kept_cols;  // indices into the pre-standardization X
};

// Standardizes every column of X and the target to zero mean, unit sample
// variance, computed over the rows of `ds` (callers pass the training span).
inline StandardizedDataset standardize(const TimeSeriesDataset& ds) {
  require(ds.n_rows() >= 2, "standardize needs at least 2 rows");
  StandardizedDataset out;
  out.dataset = ds;
  auto& stats = out.stats;

  const double scale_eps = 1e-12;
  std::vector<Index> kept;
  for (Index p = 0; p < ds.n_features(); ++p) {
    const double sd = sample_std(ds.X.col(p));
    const double ref = std::max(ds.X.col(p).cwiseAbs().maxCoeff(), 1.0);
    if (sd <= scale_eps * ref) {
      stats.dropped.push_back(ds.feature_names[static_cast<std::size_t>(p)]);
    } else {
      kept.push_back(p);
    }
  }
  require(!kept.empty(), "all feature columns have zero variance");

  stats.x_mean.resize(static_cast<Index>(kept.size()));
  stats.x_std.resize(static_cast<Index>(kept.size()));
  stats.feature_names.clear();
  for (std::size_t j = 0; j < kept.size(); ++j) {
    const Index p = kept[j];
    stats.x_mean[static_cast<Index>(j)] = ds.X.col(p).mean();
    stats.x_std[static_cast<Index>(j)] = sample_std(ds.X.col(p));
    stats.feature_names.push_back(
        ds.feature_names[static_cast<std::size_t>(p)]);
  }
  stats.y_mean = ds.y.mean();
  const double y_sd = sample_std(ds.y);
  stats.y_std = y_sd > scale_eps ? y_sd : 1.0;

  out.kept_cols = kept;
  out.dataset.feature_names = stats.feature_names;
  out.dataset.X = stats.apply(ds.X, kept);
  out.dataset.y = (ds.y.array() - stats.y_mean) / stats.y_std;
  return out;
}

}  // namespace dualcast
