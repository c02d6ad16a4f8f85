#include "dnpvi/problem.hpp"

#include "dnpvi/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace dnpvi {

namespace {

struct Entry {
    std::string value;
    int line = 0;
    int column = 0;  // 1-based column where the value starts
    bool used = false;
};

using Section = std::map<std::string, Entry, std::less<>>;

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

const std::vector<std::string_view> kSections = {"problem", "coefficients", "initial",
                                                 "boundary", "domain", "solver"};

class Document {
public:
    explicit Document(std::string_view text) {
        std::string current;
        int line_no = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            const std::size_t eol = std::min(text.find('\n', pos), text.size());
            std::string_view raw = text.substr(pos, eol - pos);
            pos = eol + 1;
            ++line_no;
            if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
            const std::string_view line = trim(raw);
            if (line.empty()) {
                if (eol == text.size()) break;
                continue;
            }
            if (line.front() == '[') {
                if (line.back() != ']') throw ParseError(fmt::format("line {}: unterminated section header", line_no), line_no, 1);
                current = std::string(trim(line.substr(1, line.size() - 2)));
                if (std::find(kSections.begin(), kSections.end(), current) == kSections.end()) {
                    throw ParseError(fmt::format("line {}: unknown section [{}]", line_no, current), line_no, 1);
                }
                sections_[current];
            } else {
                if (current.empty()) throw ParseError(fmt::format("line {}: key outside of any section", line_no), line_no, 1);
                const auto eq = raw.find('=');
                if (eq == std::string_view::npos) {
                    throw ParseError(fmt::format("line {}: expected 'key = value'", line_no), line_no, 1);
                }
                const std::string key(trim(raw.substr(0, eq)));
                std::string_view value_raw = raw.substr(eq + 1);
                std::size_t lead = 0;
                while (lead < value_raw.size() && std::isspace(static_cast<unsigned char>(value_raw[lead]))) ++lead;
                Entry entry{std::string(trim(value_raw)), line_no, static_cast<int>(eq + 2 + lead), false};
                auto& sec = sections_[current];
                if (sec.count(key) != 0) {
                    throw ParseError(fmt::format("line {}: duplicate key '{}' in [{}]", line_no, key, current), line_no, 1);
                }
                sec.emplace(key, std::move(entry));
            }
            if (eol == text.size()) break;
        }
    }

    Entry* find(std::string_view section, std::string_view key) {
        const auto s = sections_.find(std::string(section));
        if (s == sections_.end()) return nullptr;
        const auto k = s->second.find(key);
        if (k == s->second.end()) return nullptr;
        k->second.used = true;
        return &k->second;
    }

    void reject_unused() const {
        for (const auto& [name, sec] : sections_) {
            for (const auto& [key, entry] : sec) {
                if (!entry.used) {
                    throw ParseError(fmt::format("line {}: unknown key '{}' in [{}]", entry.line, key, name),
                                     entry.line, 1);
                }
            }
        }
    }

private:
    std::map<std::string, Section> sections_;
};

template <class T>
T parse_number(const Entry& entry, std::string_view key) {
    T value{};
    const std::string& s = entry.value;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ParseError(fmt::format("line {}: '{}' expects a number, got '{}'", entry.line, key, s), entry.line,
                         entry.column);
    }
    return value;
}

template <class T>
void read_number(Document& doc, std::string_view section, std::string_view key, T& out) {
    if (const Entry* e = doc.find(section, key)) out = parse_number<T>(*e, key);
}

bool parse_bool(const Entry& entry, std::string_view key) {
    if (entry.value == "true" || entry.value == "1" || entry.value == "yes") return true;
    if (entry.value == "false" || entry.value == "0" || entry.value == "no") return false;
    throw ParseError(fmt::format("line {}: '{}' expects true/false", entry.line, key), entry.line, entry.column);
}

enum Allowed : unsigned { kU = 1, kX = 2, kT = 4 };

Expr read_expr(Document& doc, std::string_view section, const std::string& key, const ParseContext& ctx,
               unsigned allowed, std::optional<double> fallback) {
    const Entry* entry = doc.find(section, key);
    if (entry == nullptr) {
        if (!fallback) throw ParseError(fmt::format("[{}] is missing required key '{}'", section, key), 0, 0);
        return Expr::constant(*fallback);
    }
    Expr expr;
    try {
        expr = parse_expr(entry->value, ctx);
    } catch (const ParseError& err) {
        const int column = entry->column + err.column() - 1;
        throw ParseError(fmt::format("line {}, key '{}': {}", entry->line, key, err.what()), entry->line, column);
    }
    for (const VarRef& v : expr.variables()) {
        const bool ok = (v.kind == VarRef::Kind::U && (allowed & kU)) ||
                        ((v.kind == VarRef::Kind::X || v.kind == VarRef::Kind::Y) && (allowed & kX)) ||
                        (v.kind == VarRef::Kind::T && (allowed & kT));
        if (!ok) {
            throw ParseError(fmt::format("line {}: '{}' may not depend on '{}'", entry->line, key, variable_name(v)),
                             entry->line, entry->column);
        }
    }
    return expr;
}

std::vector<std::string> split_words(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

}  // namespace

bool ProblemSpec::any_constrained() const {
    return std::any_of(constrained.begin(), constrained.end(), [](bool b) { return b; });
}

bool ProblemSpec::has_neumann_data() const {
    return std::any_of(g.begin(), g.end(), [](const Expr& x) { return !x.is_zero(); });
}

ProblemSpec parse_problem(std::string_view text) {
    Document doc(text);
    ProblemSpec spec;
    spec.text = std::string(text);

    if (const Entry* e = doc.find("problem", "name")) spec.name = e->value;
    read_number(doc, "problem", "m", spec.m);
    read_number(doc, "problem", "dim", spec.dim);
    read_number(doc, "problem", "nu", spec.nu);
    read_number(doc, "problem", "p", spec.p);
    read_number(doc, "problem", "alpha", spec.alpha);
    if (const Entry* e = doc.find("problem", "uniqueness")) spec.uniqueness_mode = parse_bool(*e, "uniqueness");
    read_number(doc, "problem", "samples", spec.sampling.samples);
    read_number(doc, "problem", "seed", spec.sampling.seed);
    read_number(doc, "problem", "box", spec.sampling.box);

    if (spec.m < 1 || spec.m > kMaxComponents) {
        throw ParseError(fmt::format("[problem] m must be in 1..{}", kMaxComponents), 0, 0);
    }
    if (spec.dim != 1 && spec.dim != 2) throw ParseError("[problem] dim must be 1 or 2", 0, 0);
    if (!(spec.nu > 0.0)) throw ParseError("[problem] nu must be positive", 0, 0);
    if (!(spec.p >= 0.0)) throw ParseError("[problem] p must be non-negative", 0, 0);
    if (!(spec.alpha > 0.0)) throw ParseError("[problem] alpha must be positive", 0, 0);
    if (!(spec.sampling.box > 0.0) || spec.sampling.samples < 1) {
        throw ParseError("[problem] box and samples must be positive", 0, 0);
    }

    const ParseContext ctx{spec.m, spec.dim};
    const auto idx = [](int i) { return std::to_string(i + 1); };
    static constexpr const char* kAxes[] = {"x", "y"};
    for (int j = 0; j < spec.m; ++j) {
        spec.B.push_back(read_expr(doc, "coefficients", "B" + idx(j), ctx, kU, std::nullopt));
    }
    for (int j = 0; j < spec.m; ++j) {
        for (int i = 0; i < spec.m; ++i) {
            const std::optional<double> fallback = i == j ? std::nullopt : std::optional<double>(0.0);
            spec.K.push_back(read_expr(doc, "coefficients", "K" + idx(j) + idx(i), ctx, kU, fallback));
        }
    }
    for (int j = 0; j < spec.m; ++j) {
        for (int k = 0; k < spec.dim; ++k) {
            spec.e.push_back(read_expr(doc, "coefficients", "e" + idx(j) + kAxes[k], ctx, kU, 0.0));
        }
    }
    for (int j = 0; j < spec.m; ++j) {
        spec.F.push_back(read_expr(doc, "coefficients", "F" + idx(j), ctx, kU | kX | kT, 0.0));
        spec.g.push_back(read_expr(doc, "coefficients", "g" + idx(j), ctx, kU | kX | kT, 0.0));
        spec.u0.push_back(read_expr(doc, "initial", "u0" + idx(j), ctx, kX, 0.0));
    }
    bool any_dirichlet = false;
    std::vector<Expr> dirichlet;
    for (int j = 0; j < spec.m; ++j) {
        any_dirichlet = any_dirichlet || doc.find("boundary", "dirichlet" + idx(j)) != nullptr;
    }
    if (any_dirichlet) {
        for (int j = 0; j < spec.m; ++j) {
            dirichlet.push_back(read_expr(doc, "boundary", "dirichlet" + idx(j), ctx, kX | kT, 0.0));
        }
        spec.dirichlet = std::move(dirichlet);
    }

    const std::pair<const char*, BoundaryTag> parts[] = {{"gamma1", BoundaryTag::Dirichlet},
                                                         {"gamma2", BoundaryTag::Neumann},
                                                         {"gamma3", BoundaryTag::Unilateral}};
    for (const auto& [key, tag] : parts) {
        const Entry* e = doc.find("boundary", key);
        if (e == nullptr) continue;
        for (const std::string& label : split_words(e->value)) {
            if (!spec.boundary.emplace(label, tag).second) {
                throw ParseError(fmt::format("line {}: boundary label '{}' assigned twice", e->line, label), e->line,
                                 e->column);
            }
        }
    }
    spec.constrained.assign(static_cast<std::size_t>(spec.m), false);
    if (const Entry* e = doc.find("boundary", "constrained")) {
        for (const std::string& word : split_words(e->value)) {
            if (word == "all") {
                spec.constrained.assign(static_cast<std::size_t>(spec.m), true);
                continue;
            }
            int c = 0;
            const auto [ptr, ec] = std::from_chars(word.data(), word.data() + word.size(), c);
            if (ec != std::errc{} || ptr != word.data() + word.size() || c < 1 || c > spec.m) {
                throw ParseError(fmt::format("line {}: bad constrained component '{}'", e->line, word), e->line,
                                 e->column);
            }
            spec.constrained[static_cast<std::size_t>(c - 1)] = true;
        }
    }

    if (const Entry* e = doc.find("domain", "mesh")) {
        if (e->value == "interval") {
            spec.domain.kind = DomainSpec::Kind::Interval;
        } else if (e->value == "square") {
            spec.domain.kind = DomainSpec::Kind::Square;
        } else if (e->value == "file") {
            spec.domain.kind = DomainSpec::Kind::File;
        } else {
            throw ParseError(fmt::format("line {}: mesh must be interval, square or file", e->line), e->line,
                             e->column);
        }
    } else {
        spec.domain.kind = spec.dim == 1 ? DomainSpec::Kind::Interval : DomainSpec::Kind::Square;
    }
    read_number(doc, "domain", "n", spec.domain.n);
    read_number(doc, "domain", "nx", spec.domain.nx);
    read_number(doc, "domain", "ny", spec.domain.ny);
    if (const Entry* e = doc.find("domain", "file")) spec.domain.file = e->value;

    SolverSettings& s = spec.solver;
    read_number(doc, "solver", "dt", s.dt);
    read_number(doc, "solver", "t_end", s.t_end);
    read_number(doc, "solver", "eps", s.eps);
    read_number(doc, "solver", "eps0", s.eps0);
    read_number(doc, "solver", "eps_stages", s.eps_stages);
    read_number(doc, "solver", "newton_rtol", s.newton_rtol);
    read_number(doc, "solver", "newton_atol", s.newton_atol);
    read_number(doc, "solver", "newton_max_iter", s.newton_max_iter);
    read_number(doc, "solver", "max_halvings", s.max_halvings);
    if (!(s.dt > 0.0) || !(s.t_end > 0.0) || !(s.eps > 0.0) || !(s.eps0 > 0.0) || s.eps_stages < 1 ||
        s.newton_max_iter < 1 || s.max_halvings < 0) {
        throw ParseError("[solver] values must be positive", 0, 0);
    }

    doc.reject_unused();
    if (spec.domain.kind == DomainSpec::Kind::Interval && spec.dim != 1) {
        throw ParseError("[domain] interval mesh requires dim = 1", 0, 0);
    }
    if (spec.domain.kind == DomainSpec::Kind::Square && spec.dim != 2) {
        throw ParseError("[domain] square mesh requires dim = 2", 0, 0);
    }
    return spec;
}

ProblemSpec load_problem(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument(fmt::format("cannot open problem file '{}'", path.string()));
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_problem(buffer.str());
}

Mesh make_mesh(const ProblemSpec& spec, const std::filesystem::path& base_dir) {
    const auto tag_of = [&](const char* side) {
        const auto it = spec.boundary.find(side);
        if (it == spec.boundary.end()) {
            throw InvalidArgument(fmt::format("boundary side '{}' is not assigned to gamma1/2/3", side));
        }
        return it->second;
    };
    std::optional<Mesh> mesh;
    switch (spec.domain.kind) {
        case DomainSpec::Kind::Interval:
            mesh.emplace(unit_interval_mesh(spec.domain.n, tag_of("left"), tag_of("right")));
            break;
        case DomainSpec::Kind::Square:
            mesh.emplace(unit_square_mesh(spec.domain.nx, spec.domain.ny, spec.boundary));
            break;
        case DomainSpec::Kind::File: {
            if (spec.domain.file.empty()) throw InvalidArgument("[domain] mesh = file requires 'file'");
            std::filesystem::path path(spec.domain.file);
            if (path.is_relative()) path = base_dir / path;
            mesh.emplace(load_mesh(path, spec.boundary));
            if (mesh->dim() != spec.dim) throw InvalidArgument("mesh file dimension does not match [problem] dim");
            break;
        }
    }
    if (spec.has_neumann_data() && boundary_measure(*mesh, BoundaryTag::Neumann) <= 0.0) {
        throw InvalidArgument("Neumann data g is given but no boundary part is tagged gamma2");
    }
    if (spec.any_constrained() && boundary_measure(*mesh, BoundaryTag::Unilateral) <= 0.0) {
        throw InvalidArgument("constrained components are given but no boundary part is tagged gamma3");
    }
    return std::move(*mesh);
}

}  // namespace dnpvi
