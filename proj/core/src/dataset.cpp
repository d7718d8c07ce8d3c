#include "m2oe2/data/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "m2oe2/rng.hpp"

namespace m2oe2::data {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
constexpr double kMaxMissingFraction = 0.10;
constexpr std::int64_t kWeekSeconds = 7 * 24 * 3600;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_line(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    out.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool parse_int(std::string_view s, long long& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

bool is_missing_token(std::string_view s) {
  return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == "null";
}

void fill_linear(std::vector<double>& v) {
  const std::size_t n = v.size();
  std::size_t prev = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(v[i])) continue;
    if (prev == n) {
      for (std::size_t k = 0; k < i; ++k) v[k] = v[i];
    } else if (i > prev + 1) {
      const double span = static_cast<double>(i - prev);
      for (std::size_t k = prev + 1; k < i; ++k)
        v[k] = v[prev] + (v[i] - v[prev]) * static_cast<double>(k - prev) / span;
    }
    prev = i;
  }
  if (prev != n)
    for (std::size_t k = prev + 1; k < n; ++k) v[k] = v[prev];
}

void fill_hold(std::vector<double>& v) {
  const auto first = std::find_if(v.begin(), v.end(), [](double x) { return !std::isnan(x); });
  if (first == v.end()) return;
  std::fill(v.begin(), first, *first);
  double last = *first;
  for (auto it = first; it != v.end(); ++it) {
    if (std::isnan(*it))
      *it = last;
    else
      last = *it;
  }
}

}  // namespace

// ---------------------------------------------------------------- schema ---

Schema Schema::parse(std::string_view text) {
  Schema s;
  std::size_t line_no = 0;
  for (std::string_view raw : lines_of(text)) {
    ++line_no;
    std::string_view line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw DataError("schema line " + std::to_string(line_no) + ": expected 'column = role'");
    ColumnSpec c;
    c.column = std::string(trim(line.substr(0, eq)));
    std::string_view role = trim(line.substr(eq + 1));
    if (c.column.empty())
      throw DataError("schema line " + std::to_string(line_no) + ": empty column name");
    if (role == "timestamp") {
      c.role = Role::timestamp;
    } else if (role == "load") {
      c.role = Role::load;
    } else if (role == "continuous") {
      c.role = Role::continuous;
    } else if (role.starts_with("categorical:")) {
      c.role = Role::categorical;
      long long levels = 0;
      if (!parse_int(role.substr(12), levels) || levels < 1)
        throw DataError("schema line " + std::to_string(line_no) + ": bad level count in '" +
                        std::string(role) + "'");
      c.levels = static_cast<std::size_t>(levels);
    } else {
      throw DataError("schema line " + std::to_string(line_no) + ": unknown role '" +
                      std::string(role) + "'");
    }
    for (const auto& other : s.columns)
      if (other.column == c.column)
        throw DataError("schema line " + std::to_string(line_no) + ": column '" + c.column +
                        "' mapped twice");
    s.columns.push_back(std::move(c));
  }
  const auto count = [&](Role r) {
    return std::count_if(s.columns.begin(), s.columns.end(),
                         [&](const ColumnSpec& c) { return c.role == r; });
  };
  if (count(Role::timestamp) != 1) throw DataError("schema needs exactly one timestamp column");
  if (count(Role::load) < 1) throw DataError("schema needs at least one load column");
  return s;
}

Schema Schema::read(const std::filesystem::path& path) {
  try {
    return parse(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string Schema::to_text() const {
  std::string out;
  for (const auto& c : columns) {
    out += c.column + " = ";
    switch (c.role) {
      case Role::timestamp: out += "timestamp"; break;
      case Role::load: out += "load"; break;
      case Role::continuous: out += "continuous"; break;
      case Role::categorical: out += "categorical:" + std::to_string(c.levels); break;
    }
    out += '\n';
  }
  return out;
}

const ColumnSpec& Schema::timestamp() const {
  for (const auto& c : columns)
    if (c.role == Role::timestamp) return c;
  throw DataError("schema has no timestamp column");
}

std::vector<ColumnSpec> Schema::loads() const {
  std::vector<ColumnSpec> out;
  for (const auto& c : columns)
    if (c.role == Role::load) out.push_back(c);
  return out;
}

std::vector<ColumnSpec> Schema::externals() const {
  std::vector<ColumnSpec> out;
  for (const auto& c : columns)
    if (c.role == Role::continuous || c.role == Role::categorical) out.push_back(c);
  return out;
}

// ------------------------------------------------------------ timestamps ---

std::int64_t parse_timestamp(std::string_view text) {
  text = trim(text);
  long long plain = 0;
  if (parse_int(text, plain)) return plain;

  auto field = [&](std::size_t pos, std::size_t len, int& out) {
    if (pos + len > text.size()) return false;
    long long v = 0;
    if (!parse_int(text.substr(pos, len), v)) return false;
    out = static_cast<int>(v);
    return true;
  };
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  const bool date_ok = text.size() >= 10 && text[4] == '-' && text[7] == '-' &&
                       field(0, 4, y) && field(5, 2, mo) && field(8, 2, d);
  if (!date_ok) throw DataError("unparseable timestamp '" + std::string(text) + "'");
  if (text.size() > 10) {
    const bool time_ok = (text[10] == ' ' || text[10] == 'T') && text.size() >= 16 &&
                         text[13] == ':' && field(11, 2, h) && field(14, 2, mi) &&
                         (text.size() == 16 || (text.size() == 19 && text[16] == ':' &&
                                                field(17, 2, s)));
    if (!time_ok) throw DataError("unparseable timestamp '" + std::string(text) + "'");
  }
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59)
    throw DataError("unparseable timestamp '" + std::string(text) + "'");
  return sys_days{ymd}.time_since_epoch().count() * 86400LL + h * 3600LL + mi * 60LL + s;
}

std::string format_timestamp(std::int64_t t) {
  using namespace std::chrono;
  std::int64_t days = t / 86400, secs = t % 86400;
  if (secs < 0) {
    secs += 86400;
    --days;
  }
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02d:%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(secs / 3600), static_cast<int>(secs / 60 % 60),
                static_cast<int>(secs % 60));
  return buf;
}

// ---------------------------------------------------------------- splits ---

std::string_view to_string(Part p) {
  switch (p) {
    case Part::train: return "train";
    case Part::validation: return "validation";
    case Part::test: return "test";
  }
  return "?";
}

Split chronological_split(std::size_t n) {
  return {n * 7 / 10, n * 8 / 10, n};
}

std::size_t TimeSeriesDataset::week_len() const {
  if (period <= 0 || kWeekSeconds % period != 0)
    throw DataError("sampling period of " + std::to_string(period) +
                    " s does not divide one week");
  return static_cast<std::size_t>(kWeekSeconds / period);
}

std::size_t TimeSeriesDataset::row_of(std::int64_t t) const {
  auto it = std::lower_bound(timestamps.begin(), timestamps.end(), t);
  if (it == timestamps.end() || *it != t)
    throw DataError("timestamp " + format_timestamp(t) + " is not in the dataset");
  return static_cast<std::size_t>(it - timestamps.begin());
}

// ------------------------------------------------------------- ingestion ---

TimeSeriesDataset parse_csv(std::string_view text, const Schema& schema, std::string_view source) {
  const std::string src(source);
  auto lines = lines_of(text);
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw DataError(src + ": empty file");

  const auto header = split_line(lines[0], ',');
  auto column_index = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw DataError(src + ": missing mapped column '" + name + "'");
  };

  TimeSeriesDataset ds;
  ds.load_columns = schema.loads();
  ds.external_columns = schema.externals();
  std::vector<ColumnSpec> channels = ds.load_columns;
  channels.insert(channels.end(), ds.external_columns.begin(), ds.external_columns.end());
  const std::size_t ts_col = column_index(schema.timestamp().column);
  std::vector<std::size_t> cols;
  for (const auto& c : channels) cols.push_back(column_index(c.column));
  const std::size_t C = channels.size();

  struct Row {
    std::int64_t t;
    std::size_t line;
    std::vector<double> v;
  };
  std::vector<Row> rows;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (trim(lines[ln]).empty()) continue;
    const auto cells = split_line(lines[ln], ',');
    const std::string where = src + ":" + std::to_string(ln + 1);
    if (cells.size() != header.size())
      throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                      std::to_string(cells.size()));
    Row r{0, ln + 1, std::vector<double>(C, kMissing)};
    try {
      r.t = parse_timestamp(cells[ts_col]);
    } catch (const DataError& e) {
      throw DataError(where + ", column '" + schema.timestamp().column + "': " + e.what());
    }
    for (std::size_t c = 0; c < C; ++c) {
      std::string_view cell = cells[cols[c]];
      if (is_missing_token(cell)) continue;
      double v = 0.0;
      auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || p != cell.data() + cell.size() || !std::isfinite(v))
        throw DataError(where + ", column '" + channels[c].column + "': cannot parse '" +
                        std::string(cell) + "'");
      if (channels[c].role == Role::categorical &&
          (v != std::floor(v) || v < 0 || v >= static_cast<double>(channels[c].levels)))
        throw DataError(where + ", column '" + channels[c].column + "': label " +
                        std::string(cell) + " outside 0.." + std::to_string(channels[c].levels - 1));
      r.v[c] = v;
    }
    rows.push_back(std::move(r));
  }
  if (rows.size() < 2) throw DataError(src + ": need at least 2 data rows");

  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
  std::int64_t period = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].t == rows[i - 1].t)
      throw DataError(src + ": duplicate timestamp " + format_timestamp(rows[i].t) + " (lines " +
                      std::to_string(rows[i - 1].line) + " and " + std::to_string(rows[i].line) +
                      ")");
    const std::int64_t d = rows[i].t - rows[i - 1].t;
    if (period == 0 || d < period) period = d;
  }
  for (std::size_t i = 1; i < rows.size(); ++i)
    if ((rows[i].t - rows[i - 1].t) % period != 0)
      throw DataError(src + ":" + std::to_string(rows[i].line) + ": timestamp " +
                      format_timestamp(rows[i].t) + " is off the " + std::to_string(period) +
                      " s grid");

  const std::int64_t t0 = rows.front().t;
  const std::size_t N = static_cast<std::size_t>((rows.back().t - t0) / period) + 1;
  std::vector<std::vector<double>> series(C, std::vector<double>(N, kMissing));
  for (const auto& r : rows) {
    const auto i = static_cast<std::size_t>((r.t - t0) / period);
    for (std::size_t c = 0; c < C; ++c) series[c][i] = r.v[c];
  }

  ds.period = period;
  ds.timestamps.resize(N);
  for (std::size_t i = 0; i < N; ++i) ds.timestamps[i] = t0 + static_cast<std::int64_t>(i) * period;
  ds.fill_counts.resize(C);
  for (std::size_t c = 0; c < C; ++c) {
    auto& s = series[c];
    const auto missing = static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [](double x) { return std::isnan(x); }));
    if (static_cast<double>(missing) > kMaxMissingFraction * static_cast<double>(N))
      throw DataError(src + ": column '" + channels[c].column + "' is missing " +
                      std::to_string(missing) + " of " + std::to_string(N) +
                      " values (limit 10%)");
    ds.fill_counts[c] = missing;
    if (channels[c].role == Role::categorical)
      fill_hold(s);
    else
      fill_linear(s);
  }

  const std::size_t L = ds.load_columns.size(), M = ds.external_columns.size();
  ds.loads = Tensor({N, L});
  ds.externals = Tensor({N, M});
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t c = 0; c < L; ++c) ds.loads(i, c) = series[c][i];
    for (std::size_t c = 0; c < M; ++c) ds.externals(i, c) = series[L + c][i];
  }
  ds.split = chronological_split(N);
  return ds;
}

TimeSeriesDataset load_csv(const std::filesystem::path& path, const Schema& schema) {
  if (!std::filesystem::exists(path)) throw DataError("dataset not found: " + path.string());
  return parse_csv(read_file(path), schema, path.string());
}

std::string to_csv(const TimeSeriesDataset& ds) {
  std::string out = "timestamp";
  for (const auto& c : ds.load_columns) out += "," + c.column;
  for (const auto& c : ds.external_columns) out += "," + c.column;
  out += '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out += format_timestamp(ds.timestamps[i]);
    for (std::size_t c = 0; c < ds.loads.cols(); ++c) out += "," + format_double(ds.loads(i, c));
    for (std::size_t c = 0; c < ds.externals.cols(); ++c)
      out += "," + format_double(ds.externals(i, c));
    out += '\n';
  }
  return out;
}

Schema schema_of(const TimeSeriesDataset& ds) {
  Schema s;
  s.columns.push_back({"timestamp", Role::timestamp, 0});
  s.columns.insert(s.columns.end(), ds.load_columns.begin(), ds.load_columns.end());
  s.columns.insert(s.columns.end(), ds.external_columns.begin(), ds.external_columns.end());
  return s;
}

// --------------------------------------------------------- normalization ---

namespace {

ChannelStats channel_stats(const ColumnSpec& spec, const Tensor& m, std::size_t col,
                           std::size_t rows) {
  ChannelStats s;
  s.name = spec.column;
  s.role = spec.role;
  s.levels = spec.levels;
  if (spec.role == Role::categorical) {
    s.mean = 0.0;
    s.std = spec.levels > 1 ? static_cast<double>(spec.levels - 1) : 1.0;
    s.constant = spec.levels <= 1;
    return s;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < rows; ++i) sum += m(i, col);
  s.mean = sum / static_cast<double>(rows);
  double ss = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    const double d = m(i, col) - s.mean;
    ss += d * d;
  }
  s.std = std::sqrt(ss / static_cast<double>(rows));
  if (!(s.std > 0.0)) {
    s.std = 1.0;
    s.constant = true;
  }
  return s;
}

double apply(const ChannelStats& s, double v) {
  if (s.constant) return 0.0;
  return (v - s.mean) / s.std;
}

}  // namespace

NormStats compute_stats(const TimeSeriesDataset& ds) {
  const std::size_t rows = ds.split.train_end;
  if (rows == 0) throw DataError("train split is empty");
  NormStats st;
  for (std::size_t c = 0; c < ds.load_columns.size(); ++c)
    st.loads.push_back(channel_stats(ds.load_columns[c], ds.loads, c, rows));
  for (std::size_t c = 0; c < ds.external_columns.size(); ++c)
    st.externals.push_back(channel_stats(ds.external_columns[c], ds.externals, c, rows));
  return st;
}

NormalizedDataset normalize(TimeSeriesDataset ds) {
  NormStats st = compute_stats(ds);
  return normalize(std::move(ds), st);
}

NormalizedDataset normalize(TimeSeriesDataset ds, const NormStats& stats) {
  if (stats.loads.size() != ds.load_columns.size() ||
      stats.externals.size() != ds.external_columns.size())
    throw DataError("normalization stats do not match the dataset's channels");
  NormalizedDataset out;
  const std::size_t N = ds.size();
  out.loads = Tensor(ds.loads.shape());
  out.externals = Tensor(ds.externals.shape());
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t c = 0; c < stats.loads.size(); ++c)
      out.loads(i, c) = apply(stats.loads[c], ds.loads(i, c));
    for (std::size_t c = 0; c < stats.externals.size(); ++c)
      out.externals(i, c) = apply(stats.externals[c], ds.externals(i, c));
  }
  out.stats = stats;
  out.raw = std::move(ds);
  return out;
}

double NormStats::denormalize_load(double v, std::size_t channel) const {
  const ChannelStats& s = loads.at(channel);
  return s.constant ? s.mean : v * s.std + s.mean;
}

Tensor denormalize_loads(const Tensor& normalized, const NormStats& stats) {
  const std::size_t d = stats.loads.size();
  if (d == 0 || normalized.size() % d != 0)
    throw diff::ShapeError("denormalize_loads", normalized.shape(), diff::Shape{0, d});
  Tensor out(normalized.shape());
  for (std::size_t k = 0; k < normalized.size(); ++k)
    out[k] = stats.denormalize_load(normalized[k], k % d);
  return out;
}

std::string NormStats::to_csv() const {
  std::string out = "kind,name,role,mean,std,levels,constant\n";
  auto row = [&](const char* kind, const ChannelStats& s) {
    const char* role = s.role == Role::load         ? "load"
                       : s.role == Role::categorical ? "categorical"
                                                     : "continuous";
    out += std::string(kind) + "," + s.name + "," + role + "," + format_double(s.mean) + "," +
           format_double(s.std) + "," + std::to_string(s.levels) + "," +
           (s.constant ? "1" : "0") + "\n";
  };
  for (const auto& s : loads) row("load", s);
  for (const auto& s : externals) row("external", s);
  return out;
}

NormStats NormStats::from_csv(std::string_view text) {
  NormStats st;
  auto lines = lines_of(text);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto f = split_line(lines[i], ',');
    if (f.size() != 7) throw DataError("stats line " + std::to_string(i + 1) + ": expected 7 fields");
    ChannelStats s;
    s.name = std::string(f[1]);
    s.role = f[2] == "load" ? Role::load : f[2] == "categorical" ? Role::categorical : Role::continuous;
    s.mean = parse_double(f[3]);
    s.std = parse_double(f[4]);
    long long levels = 0;
    if (!parse_int(f[5], levels)) throw DataError("stats line " + std::to_string(i + 1) + ": bad levels");
    s.levels = static_cast<std::size_t>(levels);
    s.constant = f[6] == "1";
    (f[0] == "load" ? st.loads : st.externals).push_back(std::move(s));
  }
  return st;
}

std::string NormStats::fingerprint() const { return fnv1a_hex(to_csv()); }

// ------------------------------------------------------------- windowing ---

namespace {

Part part_of(const Split& s, std::size_t row) {
  if (row < s.train_end) return Part::train;
  if (row < s.validation_end) return Part::validation;
  return Part::test;
}

}  // namespace

std::vector<WindowInstance> make_windows(const TimeSeriesDataset& ds, std::size_t horizon,
                                         std::size_t week_len, std::size_t stride) {
  const std::size_t N = ds.size();
  if (horizon == 0 || week_len == 0 || stride == 0)
    throw std::invalid_argument("make_windows: horizon, week_len and stride must be positive");
  const std::size_t need = 2 * week_len + horizon;
  if (N < need)
    throw DataError("dataset has " + std::to_string(N) + " steps; windowing needs at least " +
                    std::to_string(need) + " (two weeks of " + std::to_string(week_len) +
                    " plus horizon " + std::to_string(horizon) + ")");
  std::vector<WindowInstance> out;
  for (std::size_t i = week_len; i + horizon <= N; i += stride) {
    const Part first = part_of(ds.split, i), last = part_of(ds.split, i + horizon - 1);
    if (first != last) continue;
    out.push_back({i, (i / week_len - 1) * week_len, first});
  }
  return out;
}

std::vector<WindowInstance> select(const std::vector<WindowInstance>& all, Part part) {
  std::vector<WindowInstance> out;
  std::copy_if(all.begin(), all.end(), std::back_inserter(out),
               [&](const WindowInstance& w) { return w.part == part; });
  return out;
}

WindowInstance window_at(const TimeSeriesDataset& ds, std::size_t origin, std::size_t horizon,
                         std::size_t week_len) {
  const std::size_t N = ds.size();
  if (N < week_len + horizon)
    throw DataError("dataset too short for a single forecast origin");
  if (origin < week_len)
    throw DataError("origin " + format_timestamp(ds.timestamps[std::min(origin, N - 1)]) +
                    " lacks a full previous week of context; earliest valid origin is " +
                    format_timestamp(ds.timestamps[week_len]));
  if (origin + horizon > N)
    throw DataError("origin " + format_timestamp(ds.timestamps[origin]) +
                    " leaves fewer than " + std::to_string(horizon) +
                    " target steps; latest valid origin is " +
                    format_timestamp(ds.timestamps[N - horizon]));
  return {origin, (origin / week_len - 1) * week_len, part_of(ds.split, origin)};
}

namespace {

std::vector<std::vector<std::size_t>> group(const std::vector<WindowInstance>& instances,
                                            const std::vector<std::size_t>& order,
                                            std::size_t batch_size) {
  if (batch_size == 0) throw std::invalid_argument("batch: batch_size must be at least 1");
  std::vector<std::size_t> lengths;
  std::map<std::size_t, std::vector<std::size_t>> by_length;
  for (std::size_t idx : order) {
    const std::size_t len = instances[idx].context_length();
    auto& g = by_length[len];
    if (g.empty()) lengths.push_back(len);
    g.push_back(idx);
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t len : lengths) {
    const auto& g = by_length[len];
    for (std::size_t s = 0; s < g.size(); s += batch_size)
      out.emplace_back(g.begin() + static_cast<std::ptrdiff_t>(s),
                       g.begin() + static_cast<std::ptrdiff_t>(std::min(g.size(), s + batch_size)));
  }
  return out;
}

}  // namespace

std::vector<std::vector<std::size_t>> batch(const std::vector<WindowInstance>& instances,
                                            std::size_t batch_size, std::uint64_t seed,
                                            std::uint64_t epoch) {
  std::vector<std::size_t> order(instances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(seed, Stream::shuffle, epoch);
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  return group(instances, order, batch_size);
}

std::vector<std::vector<std::size_t>> batch_in_order(const std::vector<WindowInstance>& instances,
                                                     std::size_t batch_size) {
  std::vector<std::size_t> order(instances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  return group(instances, order, batch_size);
}

Batch assemble(const NormalizedDataset& ds, const std::vector<WindowInstance>& instances,
               const std::vector<std::size_t>& members, std::size_t horizon) {
  if (members.empty()) throw std::invalid_argument("assemble: empty batch");
  const std::size_t B = members.size();
  const std::size_t T = instances[members[0]].context_length();
  const std::size_t dx = ds.loads.cols(), M = ds.externals.cols();
  Batch b;
  b.members = members;
  b.input.batch = B;
  b.input.steps = T;
  b.input.loads = Tensor({T * B, dx});
  b.input.externals = Tensor({T * B, M});
  b.targets = Tensor({B, horizon * dx});
  for (std::size_t k = 0; k < B; ++k) {
    const WindowInstance& w = instances[members[k]];
    if (w.context_length() != T)
      throw std::invalid_argument("assemble: batch mixes context lengths " + std::to_string(T) +
                                  " and " + std::to_string(w.context_length()));
    if (w.origin + horizon > ds.loads.rows())
      throw std::out_of_range("assemble: target runs past the end of the data");
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t row = w.context_begin + t;
      for (std::size_t c = 0; c < dx; ++c) b.input.loads(t * B + k, c) = ds.loads(row, c);
      for (std::size_t c = 0; c < M; ++c) b.input.externals(t * B + k, c) = ds.externals(row, c);
    }
    for (std::size_t h = 0; h < horizon; ++h)
      for (std::size_t c = 0; c < dx; ++c) b.targets(k, h * dx + c) = ds.loads(w.origin + h, c);
  }
  return b;
}

}  // namespace m2oe2::data
