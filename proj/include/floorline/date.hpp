#pragma once

#include <compare>
#include <cstdio>
#include <string>
#include <string_view>

#include "floorline/error.hpp"

namespace floorline {

/// Calendar date, ISO "YYYY-MM-DD" on the wire. "YYYY-MM" is accepted and
/// means the first of the month.
struct Date {
  int year = 0;
  int month = 1;
  int day = 1;

  auto operator<=>(const Date&) const = default;

  static Date parse(std::string_view text) {
    Date d;
    int n = 0;
    const std::string s(text);
    if (std::sscanf(s.c_str(), "%4d-%2d-%2d%n", &d.year, &d.month, &d.day, &n) == 3 && n == int(s.size())) {
    } else if (std::sscanf(s.c_str(), "%4d-%2d%n", &d.year, &d.month, &n) == 2 && n == int(s.size())) {
      d.day = 1;
    } else {
      throw Error(ErrorCode::ParseError, "bad date '" + s + "'");
    }
    if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31)
      throw Error(ErrorCode::ParseError, "bad date '" + s + "'");
    return d;
  }

  std::string str() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
    return buf;
  }
};

}  // namespace floorline
