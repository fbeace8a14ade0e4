#pragma once

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <regex>
#include <string>

#include "qtraj/errors.hpp"
#include "qtraj/fock.hpp"
#include "qtraj/params.hpp"

namespace qtraj {

/// Parses "1", "-0.5+2i", "3e-2-1i", "2i", "-i", "inf".
inline complex parse_complex(const std::string& text) {
  static const std::regex pattern(
      R"(^\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?(?:([+-])((?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?[ij])?\s*$)");
  static const std::regex imaginary_only(
      R"(^\s*([+-]?)((?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?[ij]\s*$)");
  std::smatch m;
  if (std::regex_match(text, m, imaginary_only)) {
    const double mag = m[2].matched ? std::stod(m[2].str()) : 1.0;
    return {0.0, m[1].str() == "-" ? -mag : mag};
  }
  if (!text.empty() && std::regex_match(text, m, pattern) && (m[1].matched || m[2].matched)) {
    const double re = m[1].matched ? std::stod(m[1].str()) : 0.0;
    double im = 0.0;
    if (m[2].matched) {
      im = m[3].matched ? std::stod(m[3].str()) : 1.0;
      if (m[2].str() == "-") im = -im;
    }
    return {re, im};
  }
  throw ConfigError("cannot parse complex number '" + text + "'");
}

inline double parse_real(const std::string& text) {
  if (text == "inf" || text == "infinity") return std::numeric_limits<double>::infinity();
  double value = 0.0;
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, value);
  if (res.ec != std::errc() || res.ptr != end) {
    throw ConfigError("cannot parse real number '" + text + "'");
  }
  return value;
}

/// "coherent:alpha=1+0i", "number:n=3", "thermal:nbar=3", "thermal:beta_omega=0.29",
/// "squeezed:alpha=1+0i,r=1.2".
inline InitialState parse_initial_state(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  std::map<std::string, std::string> kv;
  if (colon != std::string::npos) {
    std::size_t pos = colon + 1;
    while (pos <= spec.size()) {
      const auto comma = std::min(spec.find(',', pos), spec.size());
      const std::string item = spec.substr(pos, comma - pos);
      const auto eq = item.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw ConfigError("expected key=value in '" + item + "'");
      }
      if (!kv.emplace(item.substr(0, eq), item.substr(eq + 1)).second) {
        throw ConfigError("duplicate key '" + item.substr(0, eq) + "'");
      }
      pos = comma + 1;
    }
  }
  auto take = [&](const std::string& key) -> std::string {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError(kind + " state needs '" + key + "'");
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto finish = [&](InitialState s) {
    if (!kv.empty()) throw ConfigError("unknown key '" + kv.begin()->first + "' for " + kind);
    validate(s);
    return s;
  };
  if (kind == "coherent") return finish(Coherent{parse_complex(take("alpha"))});
  if (kind == "number") {
    const std::string n = take("n");
    std::size_t value = 0;
    const auto res = std::from_chars(n.data(), n.data() + n.size(), value);
    if (res.ec != std::errc() || res.ptr != n.data() + n.size()) {
      throw ConfigError("number state needs a non-negative integer n, got '" + n + "'");
    }
    return finish(Number{value});
  }
  if (kind == "thermal") {
    if (kv.count("nbar") && kv.count("beta_omega")) {
      throw ConfigError("give either nbar or beta_omega, not both");
    }
    if (kv.count("beta_omega")) {
      const double bw = parse_real(take("beta_omega"));
      if (!(bw > 0.0)) throw ConfigError("beta_omega must be positive");
      return finish(Thermal::from_beta_omega(bw));
    }
    const double nbar = parse_real(take("nbar"));
    if (!(nbar >= 0.0) || !std::isfinite(nbar)) throw ConfigError("nbar must be finite and >= 0");
    return finish(Thermal{nbar});
  }
  if (kind == "squeezed") {
    const complex alpha = kv.count("alpha") ? parse_complex(take("alpha")) : complex(0.0);
    const double r = parse_real(take("r"));
    if (!std::isfinite(r)) throw ConfigError("squeezing r must be finite");
    return finish(Squeezed{alpha, r});
  }
  throw ConfigError("unknown initial state '" + kind +
                    "' (expected coherent, number, thermal or squeezed)");
}

}  // namespace qtraj
