// SPDX-License-Identifier: Apache-2.0
#include "krf/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "krf/error.hpp"

namespace krf {

namespace {

struct Entry {
  std::string value;
  int line = 0;
  int column = 0;  // 1-based column of the first value character
  bool from_env = false;
};

const std::set<std::string> kSections{"model", "flow", "solver", "barrier", "verify", "output"};

const std::set<std::string> kFixedKeys{
    "model.dims",        "model.points",        "model.kappa",          "model.A0.potential",
    "model.f_mu",        "model.reaction",      "model.reaction.slope", "model.reaction.offset",
    "model.normalize",   "flow.phi0",           "flow.t_end",           "flow.dt0",
    "flow.dt_max",       "flow.snapshot_every", "flow.scheme",          "flow.stencil",
    "flow.stencil_radius", "solver.method",     "solver.tol",           "solver.max_iter",
    "solver.semiflat_tol", "barrier.epsilons",  "barrier.divisor",      "verify.checks",
    "verify.sandwich_tol", "verify.rate_window", "verify.comparison_pairs", "verify.seed",
    "output.dir",        "output.formats"};

const std::set<std::string> kChecks{"sandwich", "classify", "rate",     "bounds", "semiflat",
                                    "comparison", "approx", "ode", "regular", "static"};

// A0.ij / Achi.ij with single-digit 1-based indices.
bool is_matrix_key(const std::string& key, const std::string& prefix, int& i, int& j) {
  if (key.size() != prefix.size() + 2 || key.compare(0, prefix.size(), prefix) != 0) return false;
  const char a = key[prefix.size()];
  const char b = key[prefix.size() + 1];
  if (a < '1' || a > '9' || b < '1' || b > '9') return false;
  i = a - '1';
  j = b - '1';
  return true;
}

bool is_known_key(const std::string& full) {
  if (kFixedKeys.count(full)) return true;
  int i = 0, j = 0;
  return is_matrix_key(full, "model.A0.", i, j) || is_matrix_key(full, "model.Achi.", i, j);
}

std::string env_name(const std::string& full) {
  std::string out = "KRF_";
  for (char c : full) out.push_back(c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

class Reader {
 public:
  explicit Reader(std::map<std::string, Entry> entries) : entries_(std::move(entries)) {}

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const Entry& at(const std::string& key) const { return entries_.at(key); }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    const Entry& e = at(key);
    if (e.from_env) throw ConfigurationError(key + " (from " + env_name(key) + "): " + msg);
    throw ParseError(key + ": " + msg, e.line, e.column);
  }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    return parse_number(key, trim(at(key).value));
  }

  long integer(const std::string& key, long fallback) const {
    if (!has(key)) return fallback;
    const std::string v = trim(at(key).value);
    long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) fail(key, "expected an integer, got '" + v + "'");
    return out;
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const std::string v = trim(at(key).value);
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) fail(key, "expected a non-negative integer, got '" + v + "'");
    return out;
  }

  std::vector<std::string> words(const std::string& key) const {
    std::string v = at(key).value;
    std::replace(v.begin(), v.end(), ',', ' ');
    std::istringstream in(v);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
  }

  std::vector<double> numbers(const std::string& key) const {
    std::vector<double> out;
    for (const std::string& w : words(key)) out.push_back(parse_number(key, w));
    if (out.empty()) fail(key, "expected at least one number");
    return out;
  }

  std::string word(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    return trim(at(key).value);
  }

  Expression expression(const std::string& key) const {
    const Entry& e = at(key);
    if (e.from_env) {
      try {
        return Expression::parse(e.value);
      } catch (const ParseError& err) {
        throw ConfigurationError(key + " (from " + env_name(key) + "): " + err.what());
      }
    }
    return Expression::parse(e.value, e.line, e.column);
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = trim(at(key).value);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail(key, "expected true or false, got '" + v + "'");
  }

  const std::map<std::string, Entry>& entries() const { return entries_; }

 private:
  double parse_number(const std::string& key, const std::string& v) const {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) fail(key, "expected a number, got '" + v + "'");
    return out;
  }

  std::map<std::string, Entry> entries_;
};

std::map<std::string, Entry> tokenize(const std::string& text) {
  std::map<std::string, Entry> entries;
  std::istringstream in(text);
  std::string section;
  int line_no = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const int indent = static_cast<int>(line.find_first_not_of(" \t")) + 1;
    if (body.front() == '[') {
      if (body.back() != ']') throw ParseError("unterminated section header", line_no, indent);
      section = trim(body.substr(1, body.size() - 2));
      if (!kSections.count(section)) {
        throw ParseError("unknown section '" + section + "'", line_no, indent + 1);
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no, indent);
    if (section.empty()) throw ParseError("key outside of a section", line_no, indent);
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError("empty key", line_no, indent);
    const std::string full = section + "." + key;
    if (!is_known_key(full)) throw ParseError("unknown key '" + key + "' in [" + section + "]", line_no, indent);
    if (entries.count(full)) throw ParseError("duplicate key '" + key + "'", line_no, indent);
    const auto vstart = line.find_first_not_of(" \t", eq + 1);
    Entry e;
    e.value = vstart == std::string::npos ? std::string() : trim(line.substr(vstart));
    if (e.value.empty()) throw ParseError("missing value for '" + key + "'", line_no, static_cast<int>(eq) + 2);
    e.line = line_no;
    e.column = static_cast<int>(vstart) + 1;
    entries.emplace(full, std::move(e));
  }
  return entries;
}

void apply_environment(std::map<std::string, Entry>& entries, const EnvLookup& env) {
  if (!env) return;
  std::vector<std::string> keys(kFixedKeys.begin(), kFixedKeys.end());
  for (int i = 1; i <= kMaxDims; ++i) {
    for (int j = i; j <= kMaxDims; ++j) {
      keys.push_back("model.A0." + std::to_string(i) + std::to_string(j));
      keys.push_back("model.Achi." + std::to_string(i) + std::to_string(j));
    }
  }
  for (const std::string& key : keys) {
    if (auto v = env(env_name(key))) {
      Entry e;
      e.value = *v;
      e.from_env = true;
      entries[key] = std::move(e);
    }
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigurationError(what);
}

void check_time_free(const Expression& e, const std::string& key) {
  if (e.depends_on_time()) throw ConfigurationError(key + ": must not depend on t");
}

}  // namespace

bool RunConfig::wants(const std::string& check) const {
  return std::find(verify.checks.begin(), verify.checks.end(), check) != verify.checks.end();
}

EnvLookup process_environment() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

RunConfig parse_config_text(const std::string& text, const EnvLookup& env) {
  std::map<std::string, Entry> entries = tokenize(text);
  apply_environment(entries, env);
  const Reader r(entries);
  RunConfig cfg;

  // [model]
  ModelSpec& m = cfg.model;
  m.n_dims = static_cast<int>(r.integer("model.dims", 1));
  require(m.n_dims >= 1 && m.n_dims <= kMaxDims, "model.dims: expected 1.." + std::to_string(kMaxDims));
  if (!r.has("model.points")) throw ConfigurationError("model.points: required");
  for (const std::string& w : r.words("model.points")) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || ptr != w.data() + w.size()) r.fail("model.points", "expected integers, got '" + w + "'");
    m.points.push_back(v);
  }
  if (m.points.size() == 1 && m.n_dims > 1) m.points.assign(static_cast<std::size_t>(m.n_dims), m.points.front());
  m.kappa = static_cast<int>(r.integer("model.kappa", m.n_dims));
  // Grid validation (sizes and kappa range) happens here so errors surface at parse time.
  (void)build_torus_grid(m.n_dims, m.points, m.kappa);

  const std::size_t n = static_cast<std::size_t>(m.n_dims);
  m.a0.assign(n, std::vector<std::optional<Expression>>(n));
  m.achi.assign(static_cast<std::size_t>(m.kappa), std::vector<std::optional<Expression>>(static_cast<std::size_t>(m.kappa)));
  for (const auto& [key, entry] : r.entries()) {
    int i = 0, j = 0;
    if (is_matrix_key(key, "model.A0.", i, j)) {
      if (i > j) r.fail(key, "give the upper triangle (i <= j)");
      if (j >= m.n_dims) r.fail(key, "index exceeds dims = " + std::to_string(m.n_dims));
      Expression e = r.expression(key);
      check_time_free(e, key);
      m.a0[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = std::move(e);
    } else if (is_matrix_key(key, "model.Achi.", i, j)) {
      if (i > j) r.fail(key, "give the upper triangle (i <= j)");
      if (j >= m.kappa) r.fail(key, "index exceeds kappa = " + std::to_string(m.kappa));
      Expression e = r.expression(key);
      check_time_free(e, key);
      m.achi[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = std::move(e);
    }
  }
  if (r.has("model.A0.potential")) {
    m.a0_potential = r.expression("model.A0.potential");
    check_time_free(*m.a0_potential, "model.A0.potential");
  }
  if (r.has("model.f_mu")) {
    m.f_mu = r.expression("model.f_mu");
    check_time_free(m.f_mu, "model.f_mu");
  }
  const std::string reaction = r.word("model.reaction", "identity");
  if (reaction == "identity") {
    require(!r.has("model.reaction.slope") && !r.has("model.reaction.offset"),
            "model.reaction.slope/offset: only valid with reaction = affine");
    m.reaction = ReactionSpec::identity();
  } else if (reaction == "affine") {
    const double slope = r.number("model.reaction.slope", 1.0);
    require(slope >= 0.0, "model.reaction.slope: must be >= 0");
    const Expression offset =
        r.has("model.reaction.offset") ? r.expression("model.reaction.offset") : Expression::constant(0.0);
    m.reaction = ReactionSpec::affine(slope, offset);
  } else {
    r.fail("model.reaction", "expected identity or affine, got '" + reaction + "'");
  }
  m.normalize = r.boolean("model.normalize", true);
  for (const auto& [key, entry] : r.entries()) {
    if (key.rfind("model.", 0) != 0 || key == "model.points" || key == "model.dims" || key == "model.kappa" ||
        key == "model.reaction" || key == "model.normalize" || key == "model.reaction.slope") {
      continue;
    }
    const Expression e = r.expression(key);
    if (e.max_coordinate() > m.n_dims) r.fail(key, "references y" + std::to_string(e.max_coordinate()) + " but dims = " + std::to_string(m.n_dims));
  }

  // [flow]
  FlowSection& f = cfg.flow;
  if (r.has("flow.phi0")) {
    f.phi0 = r.expression("flow.phi0");
    check_time_free(f.phi0, "flow.phi0");
    if (f.phi0.max_coordinate() > m.n_dims) r.fail("flow.phi0", "references a coordinate beyond dims");
  }
  f.t_end = r.number("flow.t_end", f.t_end);
  require(f.t_end > 0.0 && std::isfinite(f.t_end), "flow.t_end: must be finite and > 0");
  f.dt0 = r.number("flow.dt0", f.dt0);
  require(f.dt0 > 0.0, "flow.dt0: must be > 0");
  f.dt_max = r.number("flow.dt_max", std::max(f.dt_max, f.dt0));
  require(f.dt_max >= f.dt0, "flow.dt_max: must be >= flow.dt0");
  f.snapshot_every = static_cast<int>(r.integer("flow.snapshot_every", f.snapshot_every));
  require(f.snapshot_every >= 1, "flow.snapshot_every: must be >= 1");
  const std::string scheme = r.word("flow.scheme", "implicit");
  if (scheme == "implicit") {
    f.scheme = TimeScheme::kLinearlyImplicit;
  } else if (scheme == "explicit") {
    f.scheme = TimeScheme::kExplicit;
  } else {
    r.fail("flow.scheme", "expected implicit or explicit, got '" + scheme + "'");
  }
  const std::string stencil = r.word("flow.stencil", "central");
  if (stencil == "central") {
    f.stencil = StencilScheme::kCentral;
  } else if (stencil == "wide") {
    f.stencil = StencilScheme::kWide;
  } else {
    r.fail("flow.stencil", "expected central or wide, got '" + stencil + "'");
  }
  f.stencil_radius = static_cast<int>(r.integer("flow.stencil_radius", f.stencil_radius));
  require(f.stencil_radius >= 1 && f.stencil_radius <= 3, "flow.stencil_radius: expected 1..3");
  require(!(f.scheme == TimeScheme::kLinearlyImplicit && f.stencil == StencilScheme::kWide),
          "flow.scheme: implicit stepping needs the central stencil; use scheme = explicit with stencil = wide");

  // [solver]
  SolverSection& s = cfg.solver;
  const std::string method = r.word("solver.method", "newton");
  if (method == "newton") {
    s.method = StaticMethod::kDampedNewton;
  } else if (method == "pseudo_time") {
    s.method = StaticMethod::kPseudoTime;
  } else {
    r.fail("solver.method", "expected newton or pseudo_time, got '" + method + "'");
  }
  s.tol = r.number("solver.tol", s.tol);
  require(s.tol > 0.0, "solver.tol: must be > 0");
  s.max_iter = static_cast<int>(r.integer("solver.max_iter", s.max_iter));
  require(s.max_iter >= 1, "solver.max_iter: must be >= 1");
  s.semiflat_tol = r.number("solver.semiflat_tol", s.semiflat_tol);
  require(s.semiflat_tol >= kMinSemiflatTolerance, "solver.semiflat_tol: must be >= 1e-14");

  // [barrier]
  BarrierSection& b = cfg.barrier;
  if (r.has("barrier.epsilons")) b.epsilons = r.numbers("barrier.epsilons");
  for (double e : b.epsilons) require(e > 0.0 && e < 0.5, "barrier.epsilons: each value must lie in (0, 0.5)");
  if (r.has("barrier.divisor")) {
    b.divisor = r.expression("barrier.divisor");
    check_time_free(*b.divisor, "barrier.divisor");
    for (int d = m.kappa; d < m.n_dims; ++d) {
      if (b.divisor->depends_on_coordinate(d)) r.fail("barrier.divisor", "must depend on base coordinates only");
    }
  }

  // [verify]
  VerifySection& v = cfg.verify;
  if (r.has("verify.checks")) {
    v.checks = r.words("verify.checks");
    if (v.checks.size() == 1 && v.checks.front() == "all") v.checks.assign(kChecks.begin(), kChecks.end());
    for (const std::string& c : v.checks) {
      if (!kChecks.count(c)) r.fail("verify.checks", "unknown check '" + c + "'");
    }
  }
  v.sandwich_tol = r.number("verify.sandwich_tol", v.sandwich_tol);
  require(v.sandwich_tol >= 0.0, "verify.sandwich_tol: must be >= 0");
  if (r.has("verify.rate_window")) {
    const std::vector<double> w = r.numbers("verify.rate_window");
    if (w.size() != 2) r.fail("verify.rate_window", "expected two numbers");
    v.rate_window_start = w[0];
    v.rate_window_end = w[1];
  }
  require(v.rate_window_start >= 0.0 && v.rate_window_end > v.rate_window_start,
          "verify.rate_window: need 0 <= start < end");
  v.comparison_pairs = static_cast<int>(r.integer("verify.comparison_pairs", v.comparison_pairs));
  require(v.comparison_pairs >= 1, "verify.comparison_pairs: must be >= 1");
  v.seed = r.unsigned_integer("verify.seed", v.seed);

  // [output]
  OutputSection& o = cfg.output;
  o.dir = r.word("output.dir", o.dir);
  require(!o.dir.empty(), "output.dir: must not be empty");
  if (r.has("output.formats")) {
    o.formats = r.words("output.formats");
    for (const std::string& fmt : o.formats) {
      if (fmt != "csv" && fmt != "bin" && fmt != "json") r.fail("output.formats", "unknown format '" + fmt + "'");
    }
  }

  std::ostringstream canon;
  for (const auto& [key, entry] : entries) canon << key << " = " << trim(entry.value) << '\n';
  cfg.canonical = canon.str();
  return cfg;
}

RunConfig parse_config(const std::string& path, const EnvLookup& env) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DependencyError("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), env);
}

std::string config_hash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace krf
