#include "refmarket/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "refmarket/csv.hpp"

namespace refmarket {

namespace {

const std::map<std::string, std::set<std::string>>& schema()
{
    static const std::map<std::string, std::set<std::string>> s = {
        {"values", {"atoms", "file"}},
        {"referrals", {"family", "table"}},
        {"groups", {"n_b", "n_g", "h_b", "h_g", "unsafe"}},
        {"market", {"w_min", "r", "pool_indifference"}},
        {"initial_state", {"e_b", "e_g"}},
        {"run", {"periods", "steady_tolerance", "max_periods", "cycle_resolution", "steady_starts", "uniqueness_grid"}},
        {"policy", {"aa_kind", "aa_size", "aa_period", "kappa", "lambda", "lambda_grid", "epsilon_grid"}},
        {"abm", {"firm_count", "mode", "matching", "periods", "seed", "threads"}},
    };
    return s;
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

double to_double(const std::string& text, int line, const std::string& what)
{
    const std::string t = trim(text);
    double x = 0.0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
    if (ec != std::errc() || p != t.data() + t.size() || t.empty())
        throw ConfigError(what + ": expected a number, got '" + t + "'", line);
    return x;
}

long long to_integer(const std::string& text, int line, const std::string& what)
{
    const std::string t = trim(text);
    long long x = 0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
    if (ec != std::errc() || p != t.data() + t.size() || t.empty())
        throw ConfigError(what + ": expected an integer, got '" + t + "'", line);
    return x;
}

bool to_bool(const std::string& text, int line, const std::string& what)
{
    const std::string t = lower(trim(text));
    if (t == "true" || t == "yes" || t == "1") return true;
    if (t == "false" || t == "no" || t == "0") return false;
    throw ConfigError(what + ": expected true or false, got '" + t + "'", line);
}

std::vector<double> to_list(const std::string& text, int line, const std::string& what)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(item, line, what));
    if (out.empty()) throw ConfigError(what + ": empty list", line);
    return out;
}

ValueDistribution parse_atoms(const std::string& text, int line)
{
    std::vector<Atom> atoms;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ';')) {
        item = trim(item);
        if (item.empty()) continue;
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError("values.atoms: expected value:probability, got '" + item + "'", line);
        atoms.push_back({to_double(item.substr(0, colon), line, "values.atoms"),
                         to_double(item.substr(colon + 1), line, "values.atoms")});
    }
    std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.value < b.value; });
    try {
        return ValueDistribution(atoms);
    } catch (const DomainError& e) {
        throw ConfigError(std::string("values.atoms: ") + e.what(), line);
    }
}

std::string resolve(const std::string& base_dir, const std::string& file)
{
    const std::filesystem::path p(file);
    return p.is_absolute() ? file : (std::filesystem::path(base_dir) / p).string();
}

std::ifstream open_or_throw(const std::string& path, int line, const std::string& what)
{
    std::ifstream in(path);
    if (!in) throw ConfigError(what + ": cannot open '" + path + "'", line);
    return in;
}

class Reader {
public:
    explicit Reader(const RawConfig& raw) : raw_(raw) {}

    bool has_section(const std::string& s) const { return raw_.sections.count(s) > 0; }
    int section_line(const std::string& s) const
    {
        const auto it = raw_.section_lines.find(s);
        return it == raw_.section_lines.end() ? 0 : it->second;
    }
    const RawEntry* get(const std::string& s, const std::string& k) const
    {
        const auto sit = raw_.sections.find(s);
        if (sit == raw_.sections.end()) return nullptr;
        const auto kit = sit->second.find(k);
        return kit == sit->second.end() ? nullptr : &kit->second;
    }
    void require_section(const std::string& s) const
    {
        if (!has_section(s)) throw ConfigError("missing required section [" + s + "]", 0);
    }
    double number(const std::string& s, const std::string& k, double fallback) const
    {
        const RawEntry* e = get(s, k);
        return e ? to_double(e->value, e->line, s + "." + k) : fallback;
    }
    double required_number(const std::string& s, const std::string& k) const
    {
        const RawEntry* e = get(s, k);
        if (!e) throw ConfigError("missing required key " + s + "." + k, section_line(s));
        return to_double(e->value, e->line, s + "." + k);
    }
    long long integer(const std::string& s, const std::string& k, long long fallback, long long min_value) const
    {
        const RawEntry* e = get(s, k);
        if (!e) return fallback;
        const long long v = to_integer(e->value, e->line, s + "." + k);
        if (v < min_value)
            throw ConfigError(s + "." + k + " must be at least " + std::to_string(min_value), e->line);
        return v;
    }
    int line_of(const std::string& s, const std::string& k) const
    {
        const RawEntry* e = get(s, k);
        return e ? e->line : section_line(s);
    }

private:
    const RawConfig& raw_;
};

template <class Fn>
auto with_line(int line, const std::string& what, Fn&& fn) -> decltype(fn())
{
    try {
        return fn();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(what + ": " + e.what(), line);
    }
}

}  // namespace

RawConfig parse_ini(const std::string& text)
{
    RawConfig raw;
    std::istringstream in(text);
    std::string line_text, section;
    int line = 0;
    while (std::getline(in, line_text)) {
        ++line;
        std::string s = trim(line_text);
        if (s.empty() || s[0] == '#') continue;
        const auto hash = s.find(" #");
        if (hash != std::string::npos) s = trim(s.substr(0, hash));
        if (s.front() == '[') {
            if (s.back() != ']') throw ConfigError("malformed section header '" + s + "'", line);
            section = lower(trim(s.substr(1, s.size() - 2)));
            if (!schema().count(section)) throw ConfigError("unknown section [" + section + "]", line);
            if (raw.sections.count(section)) throw ConfigError("duplicate section [" + section + "]", line);
            raw.sections[section];
            raw.section_lines[section] = line;
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("expected key = value, got '" + s + "'", line);
        if (section.empty()) throw ConfigError("key outside any section", line);
        const std::string key = lower(trim(s.substr(0, eq)));
        const std::string value = trim(s.substr(eq + 1));
        if (!schema().at(section).count(key)) throw ConfigError("unknown key '" + key + "' in [" + section + "]", line);
        auto& keys = raw.sections[section];
        if (keys.count(key)) throw ConfigError("duplicate key '" + key + "' in [" + section + "]", line);
        if (value.empty()) throw ConfigError("empty value for '" + key + "'", line);
        keys[key] = {value, line};
    }
    return raw;
}

void RawConfig::set(const std::string& key, const std::string& value)
{
    std::string sec, k = lower(key);
    const auto dot = k.find('.');
    if (dot != std::string::npos) {
        sec = k.substr(0, dot);
        k = k.substr(dot + 1);
        const auto it = schema().find(sec);
        if (it == schema().end() || !it->second.count(k)) throw ConfigError("unknown override key '" + key + "'", 0);
    } else {
        int hits = 0;
        for (const auto& [name, keys] : schema())
            if (keys.count(k)) {
                sec = name;
                ++hits;
            }
        if (hits == 0) throw ConfigError("unknown override key '" + key + "'", 0);
        if (hits > 1) throw ConfigError("override key '" + key + "' is ambiguous; use section.key", 0);
    }
    sections[sec][k] = {value, 0};
}

std::string RawConfig::canonical() const
{
    std::string out;
    for (const auto& [sec, keys] : sections) {
        std::string body;
        for (const auto& [k, e] : keys)
            if (!(sec == "abm" && k == "threads")) body += k + "=" + e.value + "\n";  // threads never change output
        if (!body.empty() || sec != "abm") out += "[" + sec + "]\n" + body;
    }
    return out;
}

ScenarioConfig build_config(const RawConfig& raw, const std::string& base_dir)
{
    const Reader rd(raw);
    for (const char* s : {"values", "groups", "market"}) rd.require_section(s);
    ScenarioConfig cfg;

    const RawEntry* atoms = rd.get("values", "atoms");
    const RawEntry* vfile = rd.get("values", "file");
    if ((atoms != nullptr) == (vfile != nullptr))
        throw ConfigError("[values] needs exactly one of 'atoms' or 'file'", rd.section_line("values"));
    if (atoms) {
        cfg.F = parse_atoms(atoms->value, atoms->line);
    } else {
        const std::string path = resolve(base_dir, vfile->value);
        auto in = open_or_throw(path, vfile->line, "values.file");
        cfg.F = with_line(vfile->line, "values.file", [&] { return read_value_distribution(in); });
    }

    if (const RawEntry* fam = rd.get("referrals", "family")) {
        const std::string tag = lower(fam->value);
        if (tag == "poisson") {
            if (rd.get("referrals", "table")) throw ConfigError("referrals.table only applies to the tabulated family", rd.line_of("referrals", "table"));
        } else if (tag == "tabulated") {
            const RawEntry* table = rd.get("referrals", "table");
            if (!table) throw ConfigError("tabulated referral family needs referrals.table", fam->line);
            auto in = open_or_throw(resolve(base_dir, table->value), table->line, "referrals.table");
            cfg.params.family = with_line(table->line, "referrals.table", [&] { return read_tabulated_family(in); });
        } else {
            throw ConfigError("referrals.family must be poisson or tabulated, got '" + fam->value + "'", fam->line);
        }
    } else if (rd.get("referrals", "table")) {
        throw ConfigError("referrals.table given without referrals.family", rd.line_of("referrals", "table"));
    }

    cfg.params.n_b = rd.required_number("groups", "n_b");
    cfg.params.n_g = rd.required_number("groups", "n_g");
    cfg.params.h_b = rd.required_number("groups", "h_b");
    cfg.params.h_g = rd.required_number("groups", "h_g");
    if (const RawEntry* u = rd.get("groups", "unsafe")) cfg.params.unsafe = to_bool(u->value, u->line, "groups.unsafe");
    with_line(rd.section_line("groups"), "[groups]", [&] { cfg.params.validate(); });

    cfg.w_min = rd.required_number("market", "w_min");
    cfg.opt.r = rd.number("market", "r", 1.0);
    if (!(cfg.opt.r >= 0.0 && cfg.opt.r <= 1.0)) throw ConfigError("market.r must lie in [0,1]", rd.line_of("market", "r"));
    if (const RawEntry* pi = rd.get("market", "pool_indifference")) {
        const std::string v = lower(pi->value);
        if (v == "hire")
            cfg.opt.hire_pool_when_indifferent = true;
        else if (v == "no_hire")
            cfg.opt.hire_pool_when_indifferent = false;
        else
            throw ConfigError("market.pool_indifference must be hire or no_hire", pi->line);
    }
    if (!(cfg.w_min < cfg.F.max_value()))
        throw ConfigError("market.w_min must lie below the largest value", rd.line_of("market", "w_min"));

    // A side given as 'complement' makes the two employment shares sum to one.
    const RawEntry* eb = rd.get("initial_state", "e_b");
    const RawEntry* eg = rd.get("initial_state", "e_g");
    const bool cb = eb && lower(eb->value) == "complement";
    const bool cg = eg && lower(eg->value) == "complement";
    if (cb && cg) throw ConfigError("initial_state: e_b and e_g cannot both be complement", eg->line);
    const double n = cfg.params.n();
    double e_b = cfg.params.n_b / n, e_g = cfg.params.n_g / n;
    if (eb && !cb) e_b = to_double(eb->value, eb->line, "initial_state.e_b");
    if (eg && !cg) e_g = to_double(eg->value, eg->line, "initial_state.e_g");
    if (cb) e_b = 1.0 - e_g;
    if (cg) e_g = 1.0 - e_b;
    if (eb && !eg && !cb) e_g = 1.0 - e_b;
    if (eg && !eb && !cg) e_b = 1.0 - e_g;
    cfg.state = {e_b, e_g};
    with_line(rd.section_line("initial_state"), "[initial_state]", [&] { validate_state(cfg.state, cfg.params); });

    cfg.run.periods = static_cast<int>(rd.integer("run", "periods", 20, 1));
    cfg.run.steady_starts = static_cast<int>(rd.integer("run", "steady_starts", 100, 1));
    cfg.run.uniqueness_grid = static_cast<int>(rd.integer("run", "uniqueness_grid", 400, 2));
    cfg.run.tol.steady_change = rd.number("run", "steady_tolerance", kTol.steady_change);
    cfg.run.tol.cycle_resolution = rd.number("run", "cycle_resolution", kTol.cycle_resolution);
    cfg.run.tol.max_periods = static_cast<int>(rd.integer("run", "max_periods", kTol.max_periods, 1));
    if (!(cfg.run.tol.steady_change > 0.0)) throw ConfigError("run.steady_tolerance must be positive", rd.line_of("run", "steady_tolerance"));
    if (!(cfg.run.tol.cycle_resolution > 0.0)) throw ConfigError("run.cycle_resolution must be positive", rd.line_of("run", "cycle_resolution"));

    if (const RawEntry* kind = rd.get("policy", "aa_kind")) {
        AAPolicy p;
        const std::string k = lower(kind->value);
        if (k == "promote_green")
            p.kind = AAKind::PromoteGreen;
        else if (k == "demote_blue")
            p.kind = AAKind::DemoteBlue;
        else
            throw ConfigError("policy.aa_kind must be promote_green or demote_blue", kind->line);
        p.size = rd.number("policy", "aa_size", 0.0);
        if (!(p.size >= 0.0)) throw ConfigError("policy.aa_size must be nonnegative", rd.line_of("policy", "aa_size"));
        p.period = static_cast<int>(rd.integer("policy", "aa_period", 0, 0));
        cfg.policy.aa = p;
    } else if (rd.get("policy", "aa_size") || rd.get("policy", "aa_period")) {
        throw ConfigError("policy.aa_size and aa_period need policy.aa_kind", rd.section_line("policy"));
    }
    if (const RawEntry* k = rd.get("policy", "kappa")) {
        const double kappa = to_double(k->value, k->line, "policy.kappa");
        if (!(kappa >= 0.0 && kappa < 1.0)) throw ConfigError("policy.kappa must lie in [0,1)", k->line);
        cfg.policy.kappa = kappa;
    }
    if (const RawEntry* l = rd.get("policy", "lambda")) {
        const double lambda = to_double(l->value, l->line, "policy.lambda");
        if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("policy.lambda must lie in [0,1]", l->line);
        cfg.policy.lambda = lambda;
    }
    if (const RawEntry* g = rd.get("policy", "lambda_grid")) {
        cfg.policy.lambda_grid = to_list(g->value, g->line, "policy.lambda_grid");
        for (double l : cfg.policy.lambda_grid)
            if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("policy.lambda_grid entries must lie in [0,1]", g->line);
    }
    if (const RawEntry* g = rd.get("policy", "epsilon_grid"))
        cfg.policy.epsilon_grid = to_list(g->value, g->line, "policy.epsilon_grid");

    AbmConfig& a = cfg.abm;
    a.F = cfg.F;
    a.params = cfg.params;
    a.state = cfg.state;
    a.w_min = cfg.w_min;
    a.opt = cfg.opt;
    a.firm_count = rd.integer("abm", "firm_count", 100000, 1);
    a.periods = static_cast<int>(rd.integer("abm", "periods", 10, 1));
    a.seed = static_cast<std::uint64_t>(rd.integer("abm", "seed", 1, 0));
    a.threads = static_cast<int>(rd.integer("abm", "threads", 1, 1));
    if (const RawEntry* m = rd.get("abm", "mode")) {
        const std::string v = lower(m->value);
        if (v == "myopic")
            a.mode = AbmMode::Myopic;
        else if (v == "redraw")
            a.mode = AbmMode::Redraw;
        else
            throw ConfigError("abm.mode must be myopic or redraw", m->line);
    }
    if (const RawEntry* m = rd.get("abm", "matching")) {
        const std::string v = lower(m->value);
        if (v == "subset")
            a.matching = PoolMatching::Subset;
        else if (v == "sequential")
            a.matching = PoolMatching::Sequential;
        else
            throw ConfigError("abm.matching must be subset or sequential", m->line);
    }

    cfg.hash = csv::fnv1a64(raw.canonical());
    return cfg;
}

ScenarioConfig load_config(const std::string& path, RawConfig* raw_out)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'", 0);
    std::ostringstream ss;
    ss << in.rdbuf();
    RawConfig raw = parse_ini(ss.str());
    const std::string dir = std::filesystem::path(path).parent_path().string();
    ScenarioConfig cfg = build_config(raw, dir.empty() ? "." : dir);
    if (raw_out) *raw_out = std::move(raw);
    return cfg;
}

std::string config_grammar()
{
    return R"(file     := { blank | comment | section | entry }
comment  := '#' text            (also ' #' after a value)
section  := '[' name ']'
entry    := key '=' value
[values]        atoms = v:p; v:p; ...  |  file = path (CSV rows value,prob)
[referrals]     family = poisson | tabulated ; table = path (rows m,P0,P1,...)
[groups]        n_b, n_g, h_b, h_g ; unsafe = true|false
[market]        w_min ; r in [0,1] ; pool_indifference = hire | no_hire
[initial_state] e_b, e_g (a number or 'complement')
[run]           periods, steady_tolerance, max_periods, cycle_resolution, steady_starts, uniqueness_grid
[policy]        aa_kind = promote_green | demote_blue ; aa_size ; aa_period ; kappa ; lambda ; lambda_grid ; epsilon_grid
[abm]           firm_count, mode = myopic | redraw, matching = subset | sequential, periods, seed, threads
)";
}

}  // namespace refmarket
