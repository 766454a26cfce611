#include "ala/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "ala/error.hpp"

namespace ala {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

// Splits one CSV line. Double-quoted fields may contain commas; "" escapes a quote.
std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::optional<double> to_double(const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<std::int64_t> to_count(const std::string& s) {
  const auto v = to_double(s);
  if (!v || *v != std::floor(*v) || std::abs(*v) > 9e15) return std::nullopt;
  return static_cast<std::int64_t>(*v);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char ch : s) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
                    (ch >= '0' && ch <= '9') || ch == '-' || ch == '.';
    out.push_back(ok ? ch : '-');
  }
  return out;
}

}  // namespace

std::string ConfigKey::slug() const {
  std::ostringstream os;
  os << sanitize(model) << '_' << sanitize(back) << '_' << sanitize(dev) << '_'
     << sanitize(acc) << 'x' << acc_count << '_' << sanitize(cpu) << 'x' << cpu_count
     << '_' << sanitize(mode) << '_' << sanitize(prec);
  return os.str();
}

Dataset parse_csv(std::istream& in, const std::string& source, const LoadOptions& opts) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_line(line);
      break;
    }
  }
  if (header.empty()) throw EmptyInputError("empty CSV input: " + source);

  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col.emplace(header[i], i);

  std::vector<std::string> required = {"bb", "ii", "oo"};
  if (opts.require_thpt) required.push_back("thpt");
  for (const auto& name : required) {
    if (!col.count(name))
      throw SchemaError(name, source + ": missing required column '" + name + "'");
  }

  Dataset d;
  d.source = source;
  d.has_thpt = col.count("thpt") > 0;

  auto field = [&](const std::vector<std::string>& cells,
                   const std::string& name) -> std::optional<std::string> {
    const auto it = col.find(name);
    if (it == col.end()) return std::nullopt;
    if (it->second >= cells.size()) return std::string();
    return cells[it->second];
  };
  auto text = [&](const std::vector<std::string>& cells, const std::string& name) {
    auto v = field(cells, name);
    return (!v || v->empty()) ? std::string("na") : *v;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    auto row_fail = [&](const std::string& what) {
      throw RowError(line_no, source + ":" + std::to_string(line_no) + ": " + what);
    };

    BenchmarkRecord r;
    r.config.model = text(cells, "model");
    r.config.back = text(cells, "back");
    r.config.dev = text(cells, "dev");
    r.config.acc = text(cells, "acc");
    r.config.cpu = text(cells, "cpu");
    r.config.mode = text(cells, "mode");
    r.config.prec = text(cells, "prec");
    for (auto [name, slot] : {std::pair{"acc_count", &r.config.acc_count},
                              std::pair{"cpu_count", &r.config.cpu_count}}) {
      auto v = field(cells, name);
      if (!v || v->empty() || *v == "na") continue;
      auto n = to_count(*v);
      if (!n || *n < 0) row_fail(std::string(name) + " must be a non-negative integer, got '" + *v + "'");
      *slot = *n;
    }
    for (auto [name, slot] : {std::pair{"bb", &r.bb}, std::pair{"ii", &r.ii},
                              std::pair{"oo", &r.oo}}) {
      const auto v = *field(cells, name);
      auto n = to_count(v);
      if (!n || *n < 1) row_fail(std::string(name) + " must be a positive integer, got '" + v + "'");
      *slot = *n;
    }
    if (d.has_thpt) {
      const auto v = *field(cells, "thpt");
      auto t = to_double(v);
      if (!t || *t <= 0.0) row_fail("thpt must be a positive number, got '" + v + "'");
      r.thpt = *t;
    } else {
      r.thpt = std::numeric_limits<double>::quiet_NaN();
    }
    d.records.push_back(std::move(r));
  }
  if (d.records.empty()) throw EmptyInputError("no data rows in " + source);
  return d;
}

Dataset load_csv(const std::filesystem::path& path, const LoadOptions& opts) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return parse_csv(in, path.string(), opts);
}

void write_csv(std::ostream& out, const Dataset& d) {
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (!d.has_thpt && cols[i] == "thpt") continue;
    out << (i ? "," : "") << cols[i];
  }
  out << '\n';
  for (const auto& r : d.records) {
    const auto& c = r.config;
    out << quote_if_needed(c.model) << ',' << quote_if_needed(c.back) << ','
        << quote_if_needed(c.dev) << ',' << quote_if_needed(c.acc) << ',' << c.acc_count
        << ',' << quote_if_needed(c.cpu) << ',' << c.cpu_count << ','
        << quote_if_needed(c.mode) << ',' << quote_if_needed(c.prec) << ',' << r.bb << ','
        << r.ii << ',' << r.oo;
    if (d.has_thpt) out << ',' << format_double(r.thpt);
    out << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const Dataset& d) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  write_csv(out, d);
}

std::map<ConfigKey, Dataset> split_by_config(const Dataset& d) {
  if (d.empty()) throw EmptyInputError("split_by_config: empty dataset");
  std::map<ConfigKey, Dataset> groups;
  for (const auto& r : d.records) {
    auto [it, inserted] = groups.try_emplace(r.config);
    if (inserted) {
      it->second.source = d.source;
      it->second.has_thpt = d.has_thpt;
    }
    it->second.records.push_back(r);
  }
  return groups;
}

TrainTestSplit train_test_split(const Dataset& d, double test_fraction, std::uint64_t seed) {
  if (d.size() < 2) throw PreconditionError("train_test_split needs at least 2 records");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw PreconditionError("test_fraction must lie in (0, 1)");
  const auto n = d.size();
  auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<bool> is_test(n, false);
  for (std::size_t i = 0; i < n_test; ++i) is_test[idx[i]] = true;

  TrainTestSplit out;
  out.train.source = out.test.source = d.source;
  out.train.has_thpt = out.test.has_thpt = d.has_thpt;
  for (std::size_t i = 0; i < n; ++i)
    (is_test[i] ? out.test : out.train).records.push_back(d.records[i]);
  return out;
}

ExpParams ParamFamily::operator()(std::int64_t ii, std::int64_t oo) const {
  if (kind == Kind::constant) return fixed;
  const double a = alpha * std::log1p(static_cast<double>(ii)) +
                   beta * std::log1p(static_cast<double>(oo));
  const double b = gamma / (1.0 + static_cast<double>(oo) / 512.0);
  return {a, b, a + delta};
}

SynthResult synth_generate(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.ii_values.empty() || spec.oo_values.empty() || spec.bb_values.empty())
    throw PreconditionError("synth_generate: every value set must be non-empty");
  if (spec.replicates < 1) throw PreconditionError("synth_generate: replicates must be >= 1");
  if (!(spec.noise_rel >= 0.0)) throw PreconditionError("synth_generate: noise_rel must be >= 0");

  auto as_set = [](const std::vector<std::int64_t>& v) {
    std::set<std::int64_t> s(v.begin(), v.end());
    if (*s.begin() < 1) throw PreconditionError("synth_generate: values must be positive");
    return s;
  };
  const auto iis = as_set(spec.ii_values);
  const auto oos = as_set(spec.oo_values);
  const auto bbs = as_set(spec.bb_values);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  SynthResult out;
  out.data.source = "synthetic";
  for (auto ii : iis) {
    for (auto oo : oos) {
      const ExpParams p = spec.family(ii, oo);
      out.truth.emplace(WorkloadKey{ii, oo}, p);
      for (auto bb : bbs) {
        for (int rep = 0; rep < spec.replicates; ++rep) {
          double thpt = eval_throughput(p, static_cast<double>(bb));
          if (spec.noise_rel > 0.0) thpt *= 1.0 + spec.noise_rel * noise(rng);
          thpt = std::max(thpt, 1e-9);
          out.data.records.push_back({spec.config, ii, oo, bb, thpt});
        }
      }
    }
  }
  return out;
}

}  // namespace ala
