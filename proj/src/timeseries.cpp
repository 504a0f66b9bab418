#include "cobras_ts/timeseries.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "cobras_ts/error.hpp"

namespace cobras {

TimeSeries::TimeSeries(std::vector<double> values) : values_(std::move(values)) {
  if (values_.size() < 2) throw PreconditionError("time series must have length >= 2");
  for (double v : values_)
    if (!std::isfinite(v)) throw PreconditionError("time series contains a non-finite value");
}

Dataset::Dataset(std::vector<TimeSeries> series, std::optional<std::vector<std::string>> labels,
                 std::string name)
    : series_(std::move(series)), labels_(std::move(labels)), name_(std::move(name)) {
  for (const auto& s : series_)
    if (s.size() != series_.front().size())
      throw PreconditionError("all series in a dataset must share one length");
  if (labels_ && labels_->size() != series_.size())
    throw PreconditionError("label count does not match series count");
}

const std::vector<std::string>& Dataset::labels() const {
  if (!labels_) throw PreconditionError("dataset '" + name_ + "' has no labels");
  return *labels_;
}

std::size_t Dataset::class_count() const {
  const auto& l = labels();
  return std::set<std::string>(l.begin(), l.end()).size();
}

Dataset Dataset::z_normalized() const {
  std::vector<TimeSeries> out;
  out.reserve(series_.size());
  for (const auto& s : series_) out.push_back(z_normalize(s));
  return Dataset(std::move(out), labels_, name_);
}

// ---------------------------------------------------------------------------
// UCR text format

namespace {

char delimiter_char(Delimiter d) {
  switch (d) {
    case Delimiter::Comma: return ',';
    case Delimiter::Tab: return '\t';
    default: return ' ';
  }
}

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_line(std::string_view line, Delimiter d) {
  std::vector<std::string_view> tokens;
  if (d == Delimiter::Whitespace) {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      std::size_t j = i;
      while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
      if (j > i) tokens.push_back(line.substr(i, j - i));
      i = j;
    }
    return tokens;
  }
  const char c = delimiter_char(d);
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(c, start);
    tokens.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return tokens;
}

Delimiter detect(std::string_view line) {
  if (line.find(',') != std::string_view::npos) return Delimiter::Comma;
  if (line.find('\t') != std::string_view::npos) return Delimiter::Tab;
  return Delimiter::Whitespace;
}

}  // namespace

Delimiter parse_delimiter(std::string_view name) {
  if (name == "auto") return Delimiter::Auto;
  if (name == "comma" || name == ",") return Delimiter::Comma;
  if (name == "tab" || name == "\\t") return Delimiter::Tab;
  if (name == "whitespace" || name == "space") return Delimiter::Whitespace;
  throw PreconditionError("unknown delimiter '" + std::string(name) + "'");
}

Dataset parse_ucr(std::string_view text, Delimiter delimiter, std::string name) {
  std::vector<TimeSeries> series;
  std::vector<std::string> labels;
  std::size_t line_no = 0;
  std::size_t width = 0;

  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto eol = text.find('\n', pos);
    auto raw = text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;

    auto line = trim(raw);
    if (line.empty()) continue;
    if (delimiter == Delimiter::Auto) delimiter = detect(line);

    auto tokens = split_line(line, delimiter);
    if (tokens.size() < 3)
      throw ParseError("row needs a label and at least two values", line_no);
    if (width == 0) {
      width = tokens.size();
    } else if (tokens.size() != width) {
      throw ParseError("ragged row: expected " + std::to_string(width - 1) + " values, found " +
                           std::to_string(tokens.size() - 1),
                       line_no);
    }
    if (tokens[0].empty()) throw ParseError("empty label", line_no, 1);

    std::vector<double> values(tokens.size() - 1);
    for (std::size_t k = 1; k < tokens.size(); ++k) {
      auto tok = tokens[k];
      if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
      auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), values[k - 1]);
      if (ec != std::errc() || end != tok.data() + tok.size() || tok.empty())
        throw ParseError("non-numeric token '" + std::string(tokens[k]) + "'", line_no, k + 1);
    }
    try {
      series.emplace_back(std::move(values));
    } catch (const PreconditionError& e) {
      throw ParseError(e.what(), line_no);
    }
    labels.emplace_back(tokens[0]);
  }

  if (series.empty()) throw ParseError("empty dataset", 0);
  return Dataset(std::move(series), std::move(labels), std::move(name));
}

Dataset load_ucr(const std::filesystem::path& path, Delimiter delimiter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_ucr(buf.str(), delimiter, path.stem().string());
}

std::string format_ucr(const Dataset& ds, Delimiter delimiter) {
  const char d = delimiter_char(delimiter == Delimiter::Auto ? Delimiter::Comma : delimiter);
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out += ds.has_labels() ? ds.labels()[i] : std::string("0");
    for (double v : ds[i].values()) {
      out += d;
      auto res = std::to_chars(buf, buf + sizeof buf, v);
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

void save_ucr(const Dataset& ds, const std::filesystem::path& path, Delimiter delimiter) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << format_ucr(ds, delimiter);
}

// ---------------------------------------------------------------------------

std::vector<double> z_normalize(std::span<const double> values) {
  const double m = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= m;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / m);

  std::vector<double> out(values.size(), 0.0);
  if (sd < 1e-12) return out;
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - mean) / sd;
  return out;
}

TimeSeries z_normalize(const TimeSeries& ts) {
  if (ts.size() < 2) throw PreconditionError("z_normalize needs length >= 2");
  return TimeSeries(z_normalize(ts.values()));
}

// ---------------------------------------------------------------------------

Dataset generate_cbf(const CbfParams& params) {
  if (params.per_class_count < 1) throw PreconditionError("per_class_count must be >= 1");
  if (params.length < 16) throw PreconditionError("CBF length must be >= 16");
  if (params.noise_std < 0) throw PreconditionError("noise_std must be non-negative");

  const std::size_t m = params.length;
  const double scale = static_cast<double>(m) / 128.0;
  auto scaled = [&](double v) { return static_cast<long>(std::lround(v * scale)); };

  std::mt19937_64 rng(params.rng_seed);
  std::uniform_int_distribution<long> onset(scaled(16), scaled(32));
  std::uniform_int_distribution<long> duration(scaled(32), scaled(96));
  std::normal_distribution<double> normal(0.0, 1.0);

  static constexpr const char* kNames[] = {"cylinder", "bell", "funnel"};
  std::vector<TimeSeries> series;
  std::vector<std::string> labels;

  for (int cls = 0; cls < 3; ++cls) {
    for (std::size_t r = 0; r < params.per_class_count; ++r) {
      const long a = onset(rng);
      const long b = std::min<long>(a + duration(rng), static_cast<long>(m) - 1);
      const double amplitude = 6.0 + normal(rng);
      const double span = static_cast<double>(b - a);

      std::vector<double> v(m);
      for (std::size_t t = 0; t < m; ++t) {
        const long tt = static_cast<long>(t);
        double pattern = 0.0;
        if (tt >= a && tt <= b) {
          switch (cls) {
            case 0: pattern = amplitude; break;
            case 1: pattern = amplitude * static_cast<double>(tt - a) / span; break;
            default: pattern = amplitude * static_cast<double>(b - tt) / span; break;
          }
        }
        v[t] = pattern + params.noise_std * normal(rng);
      }
      series.emplace_back(std::move(v));
      labels.emplace_back(kNames[cls]);
    }
  }
  return Dataset(std::move(series), std::move(labels), "cbf");
}

}  // namespace cobras
