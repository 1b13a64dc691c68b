#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "critfield/common.hpp"
#include "critfield/params.hpp"

namespace critfield {

// Flat key=value configuration with [section] headers, one level deep.
// Keys are stored fully qualified as "section.key" ("" section for the top).
// Reads are tracked so unknown keys can be reported instead of ignored.
class Config {
 public:
  void set(const std::string& key, const std::string& value) {
    if (!map_.count(key)) order_.push_back(key);
    map_[key] = value;
  }

  bool has(const std::string& key) const { return map_.count(key) > 0; }

  std::string get(const std::string& key) const {
    auto it = map_.find(key);
    if (it == map_.end()) throw domain_error("config: missing required key '" + key + "'");
    consumed_.insert(key);
    return it->second;
  }

  std::string get_or(const std::string& key, const std::string& fallback) const {
    auto it = map_.find(key);
    if (it == map_.end()) return fallback;
    consumed_.insert(key);
    return it->second;
  }

  double get_double(const std::string& key) const { return parse_double(key, get(key)); }
  double get_double_or(const std::string& key, double fallback) const {
    return has(key) ? parse_double(key, get(key)) : fallback;
  }
  long get_int(const std::string& key) const { return parse_long(key, get(key)); }
  long get_int_or(const std::string& key, long fallback) const {
    return has(key) ? parse_long(key, get(key)) : fallback;
  }
  uint64_t get_u64_or(const std::string& key, uint64_t fallback) const {
    if (!has(key)) return fallback;
    return (uint64_t)std::stoull(get(key));
  }

  // H accepts the exact rational form "p/q" (preferred) or a float literal.
  void read_H(const std::string& key, FieldParams& p) const {
    const std::string s = get(key);
    const auto slash = s.find('/');
    if (slash != std::string::npos) {
      Rational r;
      r.num = std::stoll(s.substr(0, slash));
      r.den = std::stoll(s.substr(slash + 1));
      if (r.den <= 0 || r.num <= 0) throw domain_error("config: H rational must be positive");
      p.H = r.value();
      p.H_rational = r;
    } else {
      p.H = parse_double(key, s);
      p.H_rational.reset();
    }
  }

  std::vector<std::string> unconsumed() const {
    std::vector<std::string> out;
    for (const auto& k : order_) {
      if (!consumed_.count(k)) out.push_back(k);
    }
    return out;
  }

  const std::vector<std::string>& keys() const { return order_; }

  // Canonical text: top-level keys first, then sections in first-seen order.
  std::string emit() const {
    std::vector<std::string> sections;
    std::map<std::string, std::vector<std::string>> by_section;
    for (const auto& k : order_) {
      const auto dot = k.find('.');
      const std::string sec = dot == std::string::npos ? "" : k.substr(0, dot);
      if (!by_section.count(sec)) sections.push_back(sec);
      by_section[sec].push_back(k);
    }
    std::sort(sections.begin(), sections.end(),
              [&](const std::string& a, const std::string& b) {
                if (a.empty() != b.empty()) return a.empty();
                return false;  // keep first-seen order among non-top sections
              });
    std::ostringstream os;
    for (const auto& sec : sections) {
      if (!sec.empty()) os << "[" << sec << "]\n";
      for (const auto& k : by_section[sec]) {
        const auto dot = k.find('.');
        os << (dot == std::string::npos ? k : k.substr(dot + 1)) << "=" << map_.at(k) << "\n";
      }
    }
    return os.str();
  }

  static Config parse_text(const std::string& text) {
    Config cfg;
    std::istringstream is(text);
    std::string line, section;
    while (std::getline(is, line)) {
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      const auto last = line.find_last_not_of(" \t\r");
      line = line.substr(first, last - first + 1);
      if (line.front() == '[') {
        if (line.back() != ']') throw domain_error("config: malformed section header: " + line);
        section = line.substr(1, line.size() - 2);
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw domain_error("config: expected key=value, got: " + line);
      const std::string key = line.substr(0, eq);
      const std::string value = line.substr(eq + 1);
      if (key.empty()) throw domain_error("config: empty key in line: " + line);
      cfg.set(section.empty() ? key : section + "." + key, value);
    }
    return cfg;
  }

  static Config parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw domain_error("config: cannot open file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_text(ss.str());
  }

 private:
  static double parse_double(const std::string& key, const std::string& s) {
    // accept rationals p/q everywhere a real is expected
    const auto slash = s.find('/');
    try {
      if (slash != std::string::npos) {
        return std::stod(s.substr(0, slash)) / std::stod(s.substr(slash + 1));
      }
      size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw domain_error("config: key '" + key + "' has non-numeric value '" + s + "'");
    }
  }
  static long parse_long(const std::string& key, const std::string& s) {
    try {
      size_t pos = 0;
      const long v = std::stol(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw domain_error("config: key '" + key + "' has non-integer value '" + s + "'");
    }
  }

  std::vector<std::string> order_;
  std::map<std::string, std::string> map_;
  mutable std::set<std::string> consumed_;
};

// ------------------------------ content hash --------------------------------
// git-style blob hash: sha1("blob <len>\0" + content), hex encoded.

namespace detail {

class Sha1 {
 public:
  void update(const uint8_t* data, size_t len) {
    for (size_t i = 0; i < len; ++i) {
      buf_[buflen_++] = data[i];
      ++total_;
      if (buflen_ == 64) {
        block();
        buflen_ = 0;
      }
    }
  }

  std::string hex_digest() {
    const uint64_t bits = total_ * 8;
    uint8_t pad = 0x80;
    update(&pad, 1);
    uint8_t zero = 0;
    while (buflen_ != 56) update(&zero, 1);
    for (int i = 7; i >= 0; --i) {
      uint8_t b = (uint8_t)(bits >> (8 * i));
      buf_[buflen_++] = b;
      total_ += 1;  // not used past this point
      if (buflen_ == 64) {
        block();
        buflen_ = 0;
      }
    }
    char out[41];
    for (int i = 0; i < 5; ++i) std::snprintf(out + 8 * i, 9, "%08x", h_[i]);
    return std::string(out, 40);
  }

 private:
  static uint32_t rol(uint32_t x, int n) { return (x << n) | (x >> (32 - n)); }

  void block() {
    uint32_t w[80];
    for (int i = 0; i < 16; ++i) {
      w[i] = (uint32_t)buf_[4 * i] << 24 | (uint32_t)buf_[4 * i + 1] << 16 |
             (uint32_t)buf_[4 * i + 2] << 8 | (uint32_t)buf_[4 * i + 3];
    }
    for (int i = 16; i < 80; ++i) w[i] = rol(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
    uint32_t a = h_[0], b = h_[1], c = h_[2], d = h_[3], e = h_[4];
    for (int i = 0; i < 80; ++i) {
      uint32_t f, k;
      if (i < 20) {
        f = (b & c) | ((~b) & d);
        k = 0x5A827999;
      } else if (i < 40) {
        f = b ^ c ^ d;
        k = 0x6ED9EBA1;
      } else if (i < 60) {
        f = (b & c) | (b & d) | (c & d);
        k = 0x8F1BBCDC;
      } else {
        f = b ^ c ^ d;
        k = 0xCA62C1D6;
      }
      const uint32_t tmp = rol(a, 5) + f + e + k + w[i];
      e = d;
      d = c;
      c = rol(b, 30);
      b = a;
      a = tmp;
    }
    h_[0] += a;
    h_[1] += b;
    h_[2] += c;
    h_[3] += d;
    h_[4] += e;
  }

  uint32_t h_[5] = {0x67452301, 0xEFCDAB89, 0x98BADCFE, 0x10325476, 0xC3D2E1F0};
  uint8_t buf_[64];
  size_t buflen_ = 0;
  uint64_t total_ = 0;
};

}  // namespace detail

inline std::string git_blob_hash(const std::string& content) {
  detail::Sha1 h;
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  h.update(reinterpret_cast<const uint8_t*>(header.data()), header.size());
  h.update(reinterpret_cast<const uint8_t*>(content.data()), content.size());
  return h.hex_digest();
}

}  // namespace critfield
