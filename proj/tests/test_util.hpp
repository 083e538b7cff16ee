// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PRAGMAFILL_TESTS_TEST_UTIL_HPP_
#define PRAGMAFILL_TESTS_TEST_UTIL_HPP_

#include <sstream>
#include <string>

namespace pragmafill::test {

// Source text with every line that starts with '#' removed.
inline std::string strip_pragma_lines(const std::string& s) {
  std::istringstream in(s);
  std::string out, line;
  while (std::getline(in, line)) {
    auto first = line.find_first_not_of(" \t");
    if (first != std::string::npos && line[first] == '#') continue;
    out += line;
    out += '\n';
  }
  return out;
}

}  // namespace pragmafill::test

#endif  // PRAGMAFILL_TESTS_TEST_UTIL_HPP_
