#include "fdamon/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <iterator>
#include <map>
#include <ostream>
#include <sstream>

#include "fdamon/error.hpp"

namespace fdamon {

namespace {

constexpr const char* kModule = "ingest";
constexpr int kSecondsPerDay = 86400;
constexpr double kHoursPerDay = 24.0;

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

bool parse_int(std::string_view text, int& out) {
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

std::optional<double> parse_finite(const std::string& text) {
  if (text.empty()) return std::nullopt;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (used != text.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

// Convention day and hour in (0, 24].
std::pair<std::chrono::sys_days, double> convention_time(const SensorRecord& r) {
  if (r.seconds_of_day == 0) return {r.date - std::chrono::days{1}, kHoursPerDay};
  return {r.date, r.seconds_of_day / 3600.0};
}

template <typename Sink>
void parse_impl(std::istream& in, Sink&& on_row, std::vector<std::size_t>& bad_lines) {
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!header_seen) {
      // tolerate a UTF-8 byte order mark
      if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
      if (trim(line) != "timestamp,series_id,value")
        throw data_error(kModule, "MalformedHeader",
                         "expected 'timestamp,series_id,value', got '" + line + "'");
      header_seen = true;
      continue;
    }
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 3 || fields[1].empty()) {
      bad_lines.push_back(line_no);
      continue;
    }
    auto ts = parse_timestamp(fields[0]);
    auto value = parse_finite(fields[2]);
    if (!ts || !value) {
      bad_lines.push_back(line_no);
      continue;
    }
    on_row(SensorRecord{ts->first, ts->second, fields[1], *value});
  }
  if (!header_seen) throw data_error(kModule, "MalformedHeader", "empty input");
}

}  // namespace

std::optional<std::pair<std::chrono::sys_days, int>> parse_timestamp(const std::string& text) {
  // YYYY-MM-DDTHH:MM[:SS]
  if (text.size() < 16) return std::nullopt;
  std::string_view s(text);
  if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':')
    return std::nullopt;
  int y, mo, d, h, mi, sec = 0;
  if (!parse_int(s.substr(0, 4), y) || !parse_int(s.substr(5, 2), mo) || !parse_int(s.substr(8, 2), d) ||
      !parse_int(s.substr(11, 2), h) || !parse_int(s.substr(14, 2), mi))
    return std::nullopt;
  std::string_view rest = s.substr(16);
  if (!rest.empty()) {
    if (rest[0] != ':' || rest.size() < 3 || !parse_int(rest.substr(1, 2), sec)) return std::nullopt;
    rest = rest.substr(3);
    // fractional seconds are accepted and dropped
    if (!rest.empty() && rest[0] == '.') {
      std::size_t i = 1;
      while (i < rest.size() && std::isdigit(static_cast<unsigned char>(rest[i]))) ++i;
      rest = rest.substr(i);
    }
  }
  if (rest == "Z") rest = {};
  if (!rest.empty()) return std::nullopt;
  if (h < 0 || h > 23 || mi < 0 || mi > 59 || sec < 0 || sec > 59) return std::nullopt;
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                  std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return std::make_pair(std::chrono::sys_days{ymd}, h * 3600 + mi * 60 + sec);
}

std::optional<std::chrono::sys_days> parse_date(const std::string& text) {
  auto ts = parse_timestamp(text + "T00:00");
  if (!ts) return std::nullopt;
  return ts->first;
}

std::string format_date(std::chrono::sys_days date) {
  std::chrono::year_month_day ymd{date};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string format_timestamp(std::chrono::sys_days date, int seconds_of_day) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "T%02d:%02d:%02d", seconds_of_day / 3600, (seconds_of_day / 60) % 60,
                seconds_of_day % 60);
  return format_date(date) + buf;
}

std::vector<SensorRecord> parse_records(std::istream& in) {
  std::vector<SensorRecord> out;
  std::vector<std::size_t> bad;
  parse_impl(in, [&](SensorRecord r) { out.push_back(std::move(r)); }, bad);
  if (!bad.empty()) {
    std::string lines;
    for (std::size_t i = 0; i < bad.size() && i < 20; ++i) lines += (i ? ", " : "") + std::to_string(bad[i]);
    if (bad.size() > 20) lines += ", ... (" + std::to_string(bad.size()) + " total)";
    throw data_error(kModule, "MalformedRow", "line " + lines);
  }
  return out;
}

LenientParse parse_records_lenient(std::istream& in) {
  LenientParse result;
  parse_impl(in, [&](SensorRecord r) { result.records.push_back(std::move(r)); }, result.rejected_lines);
  return result;
}

std::chrono::sys_days first_convention_day(const std::vector<SensorRecord>& records) {
  if (records.empty()) throw data_error(kModule, "NoRecords", "cannot determine the first day");
  auto first = convention_time(records.front()).first;
  for (const auto& r : records) first = std::min(first, convention_time(r).first);
  return first;
}

std::vector<DailyProfile> assemble_profiles(const std::vector<SensorRecord>& records, const std::string& series_id,
                                            std::optional<std::chrono::sys_days> origin) {
  if (records.empty()) return {};
  const auto day0 = origin.value_or(first_convention_day(records));

  // day -> (time -> (sum, count))
  std::map<int, std::map<double, std::pair<double, int>>> grouped;
  for (const auto& r : records) {
    if (r.series_id != series_id) continue;
    auto [day, t] = convention_time(r);
    int index = static_cast<int>((day - day0).count()) + 1;
    auto& cell = grouped[index][t];
    cell.first += r.value;
    cell.second += 1;
  }

  std::vector<DailyProfile> profiles;
  profiles.reserve(grouped.size());
  for (const auto& [index, points] : grouped) {
    DailyProfile p;
    p.day_index = index;
    for (const auto& [t, acc] : points) {
      p.times.push_back(t);
      p.values.push_back(acc.first / acc.second);
    }
    profiles.push_back(std::move(p));
  }
  return profiles;
}

std::vector<SensorRecord> profiles_to_records(const std::vector<DailyProfile>& profiles, const std::string& series_id,
                                              std::chrono::sys_days origin) {
  std::vector<SensorRecord> records;
  for (const auto& p : profiles) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      auto date = origin + std::chrono::days{p.day_index - 1};
      int seconds = static_cast<int>(std::lround(p.times[i] * 3600.0));
      if (seconds >= kSecondsPerDay) {
        date += std::chrono::days{1};
        seconds -= kSecondsPerDay;
      }
      records.push_back({date, seconds, series_id, p.values[i]});
    }
  }
  return records;
}

void write_records_csv(std::ostream& out, const std::vector<SensorRecord>& records) {
  out << "timestamp,series_id,value\n";
  char buf[64];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%.17g", r.value);
    out << format_timestamp(r.date, r.seconds_of_day) << ',' << r.series_id << ',' << buf << '\n';
  }
}

AlignedDay align_day(const DailyProfile& u_profile, const DailyProfile& z_profile) {
  if (u_profile.day_index != z_profile.day_index)
    throw data_error(kModule, "DayMismatch",
                     "days " + std::to_string(u_profile.day_index) + " and " + std::to_string(z_profile.day_index));
  AlignedDay out;
  out.day_index = u_profile.day_index;
  std::size_t i = 0, j = 0;
  while (i < u_profile.size() && j < z_profile.size()) {
    double tu = u_profile.times[i], tz = z_profile.times[j];
    if (tu == tz) {
      out.times.push_back(tu);
      out.u_values.push_back(u_profile.values[i]);
      out.z_values.push_back(z_profile.values[j]);
      ++i;
      ++j;
    } else if (tu < tz) {
      ++i;
    } else {
      ++j;
    }
  }
  if (out.times.empty())
    throw data_error(kModule, "EmptyIntersection", "day " + std::to_string(out.day_index));
  return out;
}

std::vector<AlignedDay> align_series(const std::vector<DailyProfile>& u_profiles,
                                     const std::vector<DailyProfile>& z_profiles) {
  std::map<int, const DailyProfile*> z_by_day;
  for (const auto& z : z_profiles) z_by_day[z.day_index] = &z;
  std::vector<AlignedDay> out;
  for (const auto& u : u_profiles) {
    auto it = z_by_day.find(u.day_index);
    if (it == z_by_day.end()) continue;
    try {
      out.push_back(align_day(u, *it->second));
    } catch (const Error& e) {
      if (e.kind() != "EmptyIntersection") throw;
    }
  }
  return out;
}

namespace {

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  auto mid = v.begin() + n / 2;
  std::nth_element(v.begin(), mid, v.end());
  double hi = *mid;
  if (n % 2 == 1) return hi;
  double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

}  // namespace

OutlierResult filter_outliers(const std::vector<DailyProfile>& profiles, double k, std::optional<DayRange> reference) {
  if (!(k > 0.0)) throw data_error(kModule, "InvalidArgument", "outlier multiplier k must be positive");
  OutlierResult result;
  result.profiles = profiles;

  std::vector<double> pool;
  for (const auto& p : profiles)
    if (!reference || reference->contains(p.day_index)) pool.insert(pool.end(), p.values.begin(), p.values.end());
  if (pool.empty()) {
    result.report.degenerate = true;
    warn(kModule, "DegenerateScale: no reference points for outlier screening");
    return result;
  }

  auto& rep = result.report;
  rep.median = median_of(pool);
  for (auto& v : pool) v = std::abs(v - rep.median);
  rep.mad = 1.4826 * median_of(std::move(pool));
  if (rep.mad == 0.0) {
    rep.degenerate = true;
    warn(kModule, "DegenerateScale: MAD is zero, no outliers removed");
    return result;
  }
  rep.threshold = k * rep.mad;
  if (std::isinf(k)) return result;

  for (auto& p : result.profiles) {
    DailyProfile kept;
    kept.day_index = p.day_index;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (std::abs(p.values[i] - rep.median) > rep.threshold) {
        rep.removed.push_back({p.day_index, p.times[i], p.values[i]});
      } else {
        kept.times.push_back(p.times[i]);
        kept.values.push_back(p.values[i]);
      }
    }
    p = std::move(kept);
  }
  std::erase_if(result.profiles, [](const DailyProfile& p) { return p.times.empty(); });
  return result;
}

std::vector<AlignedDay> usable_profiles(const std::vector<AlignedDay>& days, std::size_t min_points) {
  if (min_points < 1) throw data_error(kModule, "InvalidArgument", "min_points must be at least 1");
  std::vector<AlignedDay> out;
  std::copy_if(days.begin(), days.end(), std::back_inserter(out),
               [&](const AlignedDay& d) { return d.size() >= min_points; });
  return out;
}

namespace {

template <typename Day>
double missing_fraction_impl(const std::vector<Day>& days, DayRange window) {
  if (window.last < window.first) throw data_error(kModule, "InvalidArgument", "empty day window");
  double expected = kHoursPerDay * window.length();
  double observed = 0.0;
  for (const auto& d : days)
    if (window.contains(d.day_index)) observed += static_cast<double>(d.size());
  return std::clamp(1.0 - observed / expected, 0.0, 1.0);
}

}  // namespace

double missing_fraction(const std::vector<DailyProfile>& profiles, DayRange window) {
  return missing_fraction_impl(profiles, window);
}

double missing_fraction(const std::vector<AlignedDay>& days, DayRange window) {
  return missing_fraction_impl(days, window);
}

ProfileBundle ProfileBundle::from_records(const std::vector<SensorRecord>& records) {
  ProfileBundle b;
  b.origin = first_convention_day(records);
  std::vector<std::string> names;
  for (const auto& r : records)
    if (std::find(names.begin(), names.end(), r.series_id) == names.end()) names.push_back(r.series_id);
  for (const auto& name : names) b.series[name] = assemble_profiles(records, name, b.origin);
  return b;
}

const std::vector<DailyProfile>& ProfileBundle::at(const std::string& series_id) const {
  auto it = series.find(series_id);
  if (it == series.end()) throw data_error(kModule, "MissingSeries", "series '" + series_id + "' not present");
  return it->second;
}

int ProfileBundle::last_day() const {
  int last = -1;
  for (const auto& [name, profiles] : series)
    if (!profiles.empty()) last = std::max(last, profiles.back().day_index);
  return last;
}

nlohmann::json to_json(const ProfileBundle& bundle) {
  nlohmann::json doc;
  doc["format"] = "fdamon.profiles";
  doc["version"] = 1;
  doc["origin"] = format_date(bundle.origin);
  doc["series"] = nlohmann::json::object();
  for (const auto& [name, profiles] : bundle.series) {
    auto arr = nlohmann::json::array();
    for (const auto& p : profiles)
      arr.push_back({{"day", p.day_index}, {"times", p.times}, {"values", p.values}});
    doc["series"][name] = std::move(arr);
  }
  return doc;
}

ProfileBundle profile_bundle_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format") != "fdamon.profiles")
      throw data_error(kModule, "SchemaMismatch", "not a profile bundle");
    if (doc.at("version") != 1)
      throw data_error(kModule, "VersionMismatch", "unsupported profile bundle version");
    ProfileBundle b;
    auto origin = parse_date(doc.at("origin").get<std::string>());
    if (!origin) throw data_error(kModule, "SchemaMismatch", "bad origin date");
    b.origin = *origin;
    for (const auto& [name, arr] : doc.at("series").items()) {
      auto& out = b.series[name];
      for (const auto& item : arr) {
        DailyProfile p;
        p.day_index = item.at("day").get<int>();
        p.times = item.at("times").get<std::vector<double>>();
        p.values = item.at("values").get<std::vector<double>>();
        if (p.times.size() != p.values.size())
          throw data_error(kModule, "SchemaMismatch", "times/values length mismatch");
        out.push_back(std::move(p));
      }
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw data_error(kModule, "SchemaMismatch", e.what());
  }
}

}  // namespace fdamon
