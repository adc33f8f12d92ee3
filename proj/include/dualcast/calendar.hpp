#pragma once

#include <cctype>
#include <cstdio>
#include <string>
#include <tuple>

#include "dualcast/common.hpp"

namespace dualcast {

enum class Frequency { quarterly, monthly };

inline Frequency frequency_from_string(const std::string& s) {
  if (s == "quarterly" || s == "q") return Frequency::quarterly;
  if (s == "monthly" || s == "m") return Frequency::monthly;
  fail("unknown frequency '" + s + "' (expected quarterly or monthly)");
}

inline std::string to_string(Frequency f) {
  return f == Frequency::quarterly ? "quarterly" : "monthly";
}

// Calendar date with the display style it was parsed from, so panel labels
// round-trip through reports unchanged.
struct Date {
  int year = 0;
  int month = 1;  // 1..12
  int day = 1;    // 1..31

  enum class Style { quarter, year_month, iso, mdy };
  Style style = Style::iso;

  static Date parse(const std::string& raw);

  std::string str() const;

  Date plus_periods(Frequency f, int n) const {
    const int step = (f == Frequency::quarterly) ? 3 : 1;
    int m0 = (year * 12) + (month - 1) + step * n;
    Date d = *this;
    d.year = m0 / 12;
    d.month = m0 % 12 + 1;
    return d;
  }

  int quarter() const { return (month - 1) / 3 + 1; }

  friend bool operator<(const Date& a, const Date& b) {
    return std::tie(a.year, a.month, a.day) < std::tie(b.year, b.month, b.day);
  }
  friend bool operator==(const Date& a, const Date& b) {
    return std::tie(a.year, a.month, a.day) == std::tie(b.year, b.month, b.day);
  }
  friend bool operator<=(const Date& a, const Date& b) { return a < b || a == b; }
  friend bool operator>(const Date& a, const Date& b) { return b < a; }
  friend bool operator>=(const Date& a, const Date& b) { return b <= a; }
  friend bool operator!=(const Date& a, const Date& b) { return !(a == b); }
};

namespace detail {

inline bool parse_int(const std::string& s, int& out) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  out = std::stoi(s);
  return true;
}

}  // namespace detail

// Accepted layouts: 1961Q2, 1961-04, 1961M4, 1961-04-01, 4/1/1961, 1961.
inline Date Date::parse(const std::string& raw) {
  std::string s = raw;
  // trim
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t'))
    s.pop_back();
  std::size_t start = 0;
  while (start < s.size() && s[start] == ' ') ++start;
  s = s.substr(start);
  require(!s.empty(), "empty date field");

  Date d;
  const auto bad = [&]() -> Date { fail("malformed date '" + raw + "'"); };

  const std::size_t q = s.find_first_of("Qq");
  if (q != std::string::npos) {
    int year = 0, quarter = 0;
    if (!detail::parse_int(s.substr(0, q), year) ||
        !detail::parse_int(s.substr(q + 1), quarter) || quarter < 1 ||
        quarter > 4)
      return bad();
    d.year = year;
    d.month = 3 * quarter - 2;
    d.style = Style::quarter;
    return d;
  }
  const std::size_t m = s.find_first_of("Mm");
  if (m != std::string::npos && m > 0) {
    int year = 0, month = 0;
    if (!detail::parse_int(s.substr(0, m), year) ||
        !detail::parse_int(s.substr(m + 1), month) || month < 1 || month > 12)
      return bad();
    d.year = year;
    d.month = month;
    d.style = Style::year_month;
    return d;
  }
  if (s.find('/') != std::string::npos) {
    int mo = 0, da = 0, yr = 0;
    if (std::sscanf(s.c_str(), "%d/%d/%d", &mo, &da, &yr) != 3 || mo < 1 ||
        mo > 12 || da < 1 || da > 31)
      return bad();
    d.year = yr;
    d.month = mo;
    d.day = da;
    d.style = Style::mdy;
    return d;
  }
  if (s.find('-') != std::string::npos) {
    int yr = 0, mo = 0, da = 1;
    const int n = std::sscanf(s.c_str(), "%d-%d-%d", &yr, &mo, &da);
    if (n < 2 || mo < 1 || mo > 12 || da < 1 || da > 31) return bad();
    d.year = yr;
    d.month = mo;
    d.day = da;
    d.style = (n == 2) ? Style::year_month : Style::iso;
    return d;
  }
  int yr = 0;
  if (!detail::parse_int(s, yr)) return bad();
  d.year = yr;
  d.style = Style::iso;
  return d;
}

inline std::string Date::str() const {
  char buf[32];
  switch (style) {
    case Style::quarter:
      std::snprintf(buf, sizeof(buf), "%04dQ%d", year, quarter());
      break;
    case Style::year_month:
      std::snprintf(buf, sizeof(buf), "%04dM%02d", year, month);
      break;
    case Style::mdy:
      std::snprintf(buf, sizeof(buf), "%d/%d/%04d", month, day, year);
      break;
    case Style::iso:
    default:
      std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
      break;
  }
  return buf;
}

}  // namespace dualcast
