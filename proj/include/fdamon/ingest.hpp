#pragma once

// Raw sensor records -> per-day functional profiles on (0h, 24h].

#include <chrono>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace fdamon {

/// Inclusive range of day indices.
struct DayRange {
  int first = 0;
  int last = std::numeric_limits<int>::max();

  bool contains(int day) const { return day >= first && day <= last; }
  int length() const { return last - first + 1; }
};

struct SensorRecord {
  std::chrono::sys_days date;
  int seconds_of_day = 0;  // [0, 86400)
  std::string series_id;
  double value = 0.0;
};

/// One day's observed curve. Times are hours in (0, 24], strictly increasing.
struct DailyProfile {
  int day_index = 0;
  std::vector<double> times;
  std::vector<double> values;

  std::size_t size() const { return times.size(); }
  bool operator==(const DailyProfile&) const = default;
};

/// Response and covariate observed at the same time points of one day.
struct AlignedDay {
  int day_index = 0;
  std::vector<double> times;
  std::vector<double> u_values;
  std::vector<double> z_values;

  std::size_t size() const { return times.size(); }
};

/// Parses `timestamp,series_id,value` CSV. Throws MalformedHeader, or
/// MalformedRow listing every offending line number.
std::vector<SensorRecord> parse_records(std::istream& in);

struct LenientParse {
  std::vector<SensorRecord> records;
  std::vector<std::size_t> rejected_lines;
};

/// Same as parse_records but skips bad rows and reports them.
LenientParse parse_records_lenient(std::istream& in);

/// Parses an ISO-8601 date-time `YYYY-MM-DDTHH:MM[:SS]` (a space may replace
/// the `T`). Returns nullopt on malformed input.
std::optional<std::pair<std::chrono::sys_days, int>> parse_timestamp(const std::string& text);
std::string format_timestamp(std::chrono::sys_days date, int seconds_of_day);
std::string format_date(std::chrono::sys_days date);
std::optional<std::chrono::sys_days> parse_date(const std::string& text);

/// Earliest convention day (midnight belongs to the previous day) over all records.
std::chrono::sys_days first_convention_day(const std::vector<SensorRecord>& records);

/// Groups one series into daily profiles. Clock time 00:00 maps to t = 24 of
/// the preceding day. Day indices count calendar days from `origin`, which is
/// day 1 (default origin: first_convention_day over all records); gaps preserved.
/// Duplicate timestamps within a day are averaged.
std::vector<DailyProfile> assemble_profiles(const std::vector<SensorRecord>& records,
                                            const std::string& series_id,
                                            std::optional<std::chrono::sys_days> origin = {});

/// Inverse of assemble_profiles.
std::vector<SensorRecord> profiles_to_records(const std::vector<DailyProfile>& profiles,
                                              const std::string& series_id,
                                              std::chrono::sys_days origin);

void write_records_csv(std::ostream& out, const std::vector<SensorRecord>& records);

/// Intersection of the two time grids. Throws EmptyIntersection.
AlignedDay align_day(const DailyProfile& u_profile, const DailyProfile& z_profile);

/// Aligns every day present in both series; days with an empty intersection
/// are skipped.
std::vector<AlignedDay> align_series(const std::vector<DailyProfile>& u_profiles,
                                     const std::vector<DailyProfile>& z_profiles);

struct OutlierReport {
  double median = 0.0;
  double mad = 0.0;        // normal-consistent (1.4826 x raw MAD)
  double threshold = 0.0;  // k * mad
  bool degenerate = false; // mad == 0, nothing removed
  struct Point {
    int day_index;
    double time;
    double value;
  };
  std::vector<Point> removed;
};

struct OutlierResult {
  std::vector<DailyProfile> profiles;
  OutlierReport report;
};

/// Drops points with |value - median| > k * MAD. Median and MAD are computed
/// over the points whose day lies in `reference` (all days by default).
OutlierResult filter_outliers(const std::vector<DailyProfile>& profiles, double k = 5.0,
                              std::optional<DayRange> reference = {});

std::vector<AlignedDay> usable_profiles(const std::vector<AlignedDay>& days, std::size_t min_points = 6);

/// 1 - observed / (24 * number of days in window).
double missing_fraction(const std::vector<DailyProfile>& profiles, DayRange window);
double missing_fraction(const std::vector<AlignedDay>& days, DayRange window);

/// Collection of profiles for several series sharing one day origin; this is
/// the document written by `fdamon ingest`.
struct ProfileBundle {
  std::chrono::sys_days origin;
  std::map<std::string, std::vector<DailyProfile>> series;

  static ProfileBundle from_records(const std::vector<SensorRecord>& records);
  const std::vector<DailyProfile>& at(const std::string& series_id) const;
  int last_day() const;
};

nlohmann::json to_json(const ProfileBundle& bundle);
ProfileBundle profile_bundle_from_json(const nlohmann::json& doc);

}  // namespace fdamon
