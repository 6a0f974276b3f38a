#include "fsdim/digit_file.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>

namespace fsdim {

DigitWord read_digits(std::istream& in, std::optional<Base> declared_base) {
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("digit file: missing header line");
  if (!header.empty() && header.back() == '\r') header.pop_back();
  if (header.rfind("base=", 0) != 0) throw std::runtime_error("digit file: header must be 'base=<b>'");
  Base file_base = 0;
  const char* first = header.data() + 5;
  const char* last = header.data() + header.size();
  if (auto [p, ec] = std::from_chars(first, last, file_base); ec != std::errc{} || p != last) {
    throw std::runtime_error("digit file: bad base in header '" + header + "'");
  }
  DigitWord::check_base(file_base);
  const Base base = declared_base.value_or(file_base);

  std::vector<Digit> digits;
  std::string token;
  while (in >> token) {
    if (file_base <= 10 && token.size() > 1) {
      for (const char c : token) {
        if (c < '0' || c > '9') throw std::runtime_error("digit file: bad token '" + token + "'");
        digits.push_back(static_cast<Digit>(c - '0'));
      }
      continue;
    }
    Digit d = 0;
    const char* tb = token.data();
    const char* te = tb + token.size();
    if (auto [p, ec] = std::from_chars(tb, te, d); ec != std::errc{} || p != te) {
      throw std::runtime_error("digit file: bad token '" + token + "'");
    }
    digits.push_back(d);
  }
  for (const Digit d : digits) {
    if (d >= base) {
      throw std::runtime_error("digit file: digit " + std::to_string(d) + " does not fit base " +
                               std::to_string(base));
    }
  }
  return DigitWord(base, std::move(digits));
}

DigitWord read_digit_file(const std::filesystem::path& path, std::optional<Base> declared_base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open digit file " + path.string());
  return read_digits(in, declared_base);
}

void write_digits(std::ostream& out, const DigitWord& w) {
  out << "base=" << w.base() << '\n';
  const auto digits = w.digits();
  constexpr std::size_t kPerLine = 64;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    out << digits[i];
    out << ((i + 1) % kPerLine == 0 || i + 1 == digits.size() ? '\n' : ' ');
  }
}

void write_digit_file(const std::filesystem::path& path, const DigitWord& w) {
  std::ostringstream buf;
  write_digits(buf, w);
  write_file_atomic(path, buf.str());
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    if (!out.flush()) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace fsdim
