#include "masys/cli_io.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include "CLI11.hpp"

#include "masys/errors.hpp"

namespace masys {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& text, const std::string& context) {
    const std::string t = trim(text);
    double v = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc{} || res.ptr != t.data() + t.size() || !std::isfinite(v)) {
        throw InvalidInput(context + ": expected a number, got '" + text + "'");
    }
    return v;
}

long long parse_integer(const std::string& text, const std::string& context) {
    const std::string t = trim(text);
    long long v = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
        throw InvalidInput(context + ": expected an integer, got '" + text + "'");
    }
    return v;
}

bool parse_bool(const std::string& text, const std::string& context) {
    const std::string t = trim(text);
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    throw InvalidInput(context + ": expected true or false, got '" + text + "'");
}

std::vector<double> parse_numbers(const std::string& text, const std::string& context) {
    std::vector<double> out;
    for (const auto& part : split(text, ',')) out.push_back(parse_double(part, context));
    return out;
}

const std::vector<std::string>& known_checks() {
    static const std::vector<std::string> names = {"nibp",     "amgm",     "uvn",      "minkowski", "cd1",
                                                   "scaling",  "sup_bound", "distance", "uniqueness", "p_equals_n"};
    return names;
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Domains

ConvexDomain parse_domain(const std::string& spec) {
    const auto colon = spec.find(':');
    const std::string kind = trim(spec.substr(0, colon));
    const std::string params = colon == std::string::npos ? "" : spec.substr(colon + 1);
    const std::string ctx = "domain '" + spec + "'";
    if (kind == "polygon") {
        std::vector<Point> v;
        for (const auto& vertex : split(params, ';')) {
            const auto xy = parse_numbers(vertex, ctx);
            if (xy.size() != 2) throw InvalidInput(ctx + ": polygon vertices are 'x,y' separated by ';'");
            v.push_back({xy[0], xy[1]});
        }
        return ConvexDomain::polygon(std::move(v));
    }
    const std::vector<double> a = params.empty() ? std::vector<double>{} : parse_numbers(params, ctx);
    if (kind == "disk") {
        if (a.size() == 1) return ConvexDomain::disk({0.0, 0.0}, a[0]);
        if (a.size() == 3) return ConvexDomain::disk({a[0], a[1]}, a[2]);
        throw InvalidInput(ctx + ": disk takes 'r' or 'cx,cy,r'");
    }
    if (kind == "square") {
        if (a.empty()) return ConvexDomain::square(1.0);
        if (a.size() == 1) return ConvexDomain::square(a[0]);
        throw InvalidInput(ctx + ": square takes an optional side length");
    }
    if (kind == "rect") {
        if (a.size() == 4) return ConvexDomain::rectangle({a[0], a[1]}, {a[2], a[3]});
        throw InvalidInput(ctx + ": rect takes 'x0,y0,x1,y1'");
    }
    if (kind == "ellipse") {
        if (a.size() == 2) return ConvexDomain::ellipse({0.0, 0.0}, a[0], a[1]);
        if (a.size() == 3) return ConvexDomain::ellipse({0.0, 0.0}, a[0], a[1], a[2]);
        if (a.size() == 5) return ConvexDomain::ellipse({a[0], a[1]}, a[2], a[3], a[4]);
        throw InvalidInput(ctx + ": ellipse takes 'a,b', 'a,b,rotation' or 'cx,cy,a,b,rotation'");
    }
    throw InvalidInput(ctx + ": unknown kind '" + kind + "' (disk, square, rect, ellipse, polygon)");
}

// ---------------------------------------------------------------------------
// Run configuration

void RunConfig::set(const std::string& key, const std::string& value, const std::string& context) {
    const std::string ctx = context + " (" + key + ")";
    auto positive = [&](double v) {
        if (!(v > 0.0)) throw InvalidInput(ctx + ": must be positive");
        return v;
    };
    auto count = [&](long long v, long long lo) {
        if (v < lo || v > std::numeric_limits<int>::max()) {
            throw InvalidInput(ctx + ": must be an integer >= " + std::to_string(lo));
        }
        return static_cast<int>(v);
    };
    if (key == "domain") {
        parse_domain(value);
        domain = trim(value);
    } else if (key == "h") {
        h = positive(parse_double(value, ctx));
    } else if (key == "stencil") {
        stencil = count(parse_integer(value, ctx), 2);
        if (stencil > StencilSet::kMaxPairs) throw InvalidInput(ctx + ": at most " + std::to_string(StencilSet::kMaxPairs) + " pairs");
    } else if (key == "penalty") {
        penalty = parse_double(value, ctx);
        if (penalty < 0.0) throw InvalidInput(ctx + ": must be >= 0");
    } else if (key == "rhs") {
        rhs = parse_double(value, ctx);
        if (rhs < 0.0) throw InvalidInput(ctx + ": negative rhs");
    } else if (key == "method") {
        method = trim(value);
        if (method != "newton" && method != "gauss_seidel") throw InvalidInput(ctx + ": expected newton or gauss_seidel");
    } else if (key == "tol_residual") {
        tol_residual = positive(parse_double(value, ctx));
    } else if (key == "inner_tol") {
        inner_tol = positive(parse_double(value, ctx));
    } else if (key == "max_outer_iterations") {
        max_outer_iterations = count(parse_integer(value, ctx), 1);
    } else if (key == "damping") {
        damping = parse_double(value, ctx);
        if (!(damping > 0.0 && damping <= 1.0)) throw InvalidInput(ctx + ": must lie in (0, 1]");
    } else if (key == "regularization") {
        regularization = parse_double(value, ctx);
        if (regularization < 0.0) throw InvalidInput(ctx + ": must be >= 0");
    } else if (key == "tol_lambda") {
        tol_lambda = positive(parse_double(value, ctx));
    } else if (key == "tol_field") {
        tol_field = positive(parse_double(value, ctx));
    } else if (key == "system_tol_residual") {
        system_tol_residual = positive(parse_double(value, ctx));
    } else if (key == "max_iterations") {
        max_iterations = count(parse_integer(value, ctx), 1);
    } else if (key == "p") {
        p = positive(parse_double(value, ctx));
    } else if (key == "p_list") {
        p_list = parse_numbers(value, ctx);
        for (double x : p_list) positive(x);
    } else if (key == "seed") {
        const long long s = parse_integer(value, ctx);
        if (s < 0) throw InvalidInput(ctx + ": must be >= 0");
        seed = static_cast<std::uint64_t>(s);
    } else if (key == "seed_count") {
        seed_count = count(parse_integer(value, ctx), 2);
    } else if (key == "checks") {
        checks.clear();
        for (const auto& c : split(value, ',')) {
            if (c != "all" && std::find(known_checks().begin(), known_checks().end(), c) == known_checks().end()) {
                throw InvalidInput(ctx + ": unknown check '" + c + "'");
            }
            checks.push_back(c);
        }
    } else if (key == "output") {
        output = trim(value);
    } else if (key == "emit_plot_data") {
        emit_plot_data = parse_bool(value, ctx);
    } else if (key == "dump_fields") {
        dump_fields = parse_bool(value, ctx);
    } else if (key == "history") {
        history = parse_bool(value, ctx);
    } else if (key == "jobs") {
        jobs = count(parse_integer(value, ctx), 1);
    } else if (key == "verbosity") {
        verbosity = count(parse_integer(value, ctx), 0);
    } else {
        throw InvalidInput(context + ": unknown key '" + key + "'");
    }
}

void RunConfig::validate() const {
    parse_domain(domain);
    if (!(h > 0.0)) throw InvalidInput("h must be positive");
    StencilSet{stencil};
    dirichlet_config().validate();
    spectral_config().validate();
    if (command == "sweep" && p_list.empty()) throw InvalidInput("sweep needs p_list");
}

SolverConfig RunConfig::dirichlet_config() const {
    SolverConfig c;
    c.tol_residual = tol_residual;
    c.max_outer_iterations = max_outer_iterations;
    c.damping = damping;
    c.regularization = regularization;
    c.verbosity = verbosity;
    c.ma.penalty = penalty;
    c.method = method == "gauss_seidel" ? DirichletMethod::gauss_seidel : DirichletMethod::newton;
    return c;
}

SpectralConfig RunConfig::spectral_config() const {
    SpectralConfig c;
    c.inner = dirichlet_config();
    c.inner.tol_residual = inner_tol;
    c.tol_lambda = tol_lambda;
    c.tol_field = tol_field;
    c.tol_residual = system_tol_residual;
    c.max_iterations = max_iterations;
    return c;
}

json RunConfig::to_json() const {
    return json{{"command", command},
                {"domain", domain},
                {"h", h},
                {"stencil", stencil},
                {"penalty", penalty},
                {"rhs", rhs},
                {"method", method},
                {"tol_residual", tol_residual},
                {"inner_tol", inner_tol},
                {"max_outer_iterations", max_outer_iterations},
                {"damping", damping},
                {"regularization", regularization},
                {"tol_lambda", tol_lambda},
                {"tol_field", tol_field},
                {"system_tol_residual", system_tol_residual},
                {"max_iterations", max_iterations},
                {"p", p},
                {"p_list", p_list},
                {"seed", seed},
                {"seed_count", seed_count},
                {"checks", checks},
                {"output", output},
                {"emit_plot_data", emit_plot_data},
                {"dump_fields", dump_fields},
                {"history", history},
                {"jobs", jobs},
                {"verbosity", verbosity}};
}

void load_config_file(RunConfig& config, const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open config file " + path.string());
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        const std::string body = trim(line.substr(0, hash));
        if (body.empty()) continue;
        const std::string where = path.string() + ":" + std::to_string(number);
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw InvalidInput(where + ": expected 'key = value'");
        config.set(trim(body.substr(0, eq)), trim(body.substr(eq + 1)), where);
    }
}

// ---------------------------------------------------------------------------
// Field dumps

std::uint64_t domain_hash(const std::string& domain_description) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (unsigned char c : domain_description) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

FieldDump make_dump(const Grid& grid, const ScalarField& field, const std::string& name) {
    if (field.size() != grid.interior_count()) throw InvalidInput("make_dump: field size does not match the grid");
    if (name.empty() || name.find_first_of(" \t\n") != std::string::npos)
        throw InvalidInput("make_dump: field name must be a single word");
    FieldDump d;
    d.name = name;
    d.nx = grid.nx();
    d.ny = grid.ny();
    d.h = grid.h();
    d.box = grid.box();
    d.domain = grid.domain().describe();
    d.domain_hash = domain_hash(d.domain);
    d.values.assign(static_cast<std::size_t>(d.nx) * d.ny, std::numeric_limits<double>::quiet_NaN());
    for (int n = 0; n < grid.interior_count(); ++n) {
        const auto [i, j] = grid.lattice_coords(n);
        d.values[static_cast<std::size_t>(j) * d.nx + i] = field[n];
    }
    return d;
}

ScalarField field_from_dump(const FieldDump& dump, const Grid& grid) {
    if (dump.nx != grid.nx() || dump.ny != grid.ny() || dump.h != grid.h() || dump.domain != grid.domain().describe()) {
        throw InvalidInput("field dump '" + dump.name + "' was written on a different grid");
    }
    ScalarField out(grid.interior_count());
    for (int n = 0; n < grid.interior_count(); ++n) {
        const auto [i, j] = grid.lattice_coords(n);
        const double v = dump.values[static_cast<std::size_t>(j) * dump.nx + i];
        if (std::isnan(v)) throw InvalidInput("field dump has no value at an interior node");
        out[n] = v;
    }
    return out;
}

void write_field(const fs::path& path, const FieldDump& d) {
    if (d.values.size() != static_cast<std::size_t>(d.nx) * d.ny) throw InvalidInput("write_field: size mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot write " + path.string());
    out << "MASYS-FIELD v" << d.version << "\n"
        << "name " << d.name << "\n"
        << "nx " << d.nx << "\n"
        << "ny " << d.ny << "\n"
        << "h " << format_double(d.h) << "\n"
        << "box " << format_double(d.box.lo.x) << " " << format_double(d.box.lo.y) << " "
        << format_double(d.box.hi.x) << " " << format_double(d.box.hi.y) << "\n"
        << "domain " << d.domain << "\n"
        << "domain_hash " << hex64(d.domain_hash) << "\n"
        << "data\n";
    for (int j = 0; j < d.ny; ++j) {
        for (int i = 0; i < d.nx; ++i) {
            const double v = d.values[static_cast<std::size_t>(j) * d.nx + i];
            if (i) out << ' ';
            out << (std::isnan(v) ? std::string("*") : format_double(v));
        }
        out << '\n';
    }
    out << "end\n";
    if (!out) throw InvalidInput("error while writing " + path.string());
}

namespace {

// Cursor over the dump text that reports errors with byte offsets.
class DumpReader {
public:
    DumpReader(std::string text, std::string file) : text_(std::move(text)), file_(std::move(file)) {}

    [[noreturn]] void fail(const std::string& what, std::size_t at) const {
        throw InvalidInput(file_ + ": " + what + " at byte offset " + std::to_string(at));
    }

    std::string line() {
        if (pos_ >= text_.size()) fail("unexpected end of file (truncated)", pos_);
        const auto nl = text_.find('\n', pos_);
        if (nl == std::string::npos) fail("unexpected end of file (truncated line)", text_.size());
        line_start_ = pos_;
        std::string out = text_.substr(pos_, nl - pos_);
        pos_ = nl + 1;
        return out;
    }

    std::string keyed(const std::string& key) {
        const std::string l = line();
        if (l.rfind(key + " ", 0) != 0) fail("expected header field '" + key + "'", line_start_);
        return l.substr(key.size() + 1);
    }

    std::size_t line_start() const { return line_start_; }
    bool at_end() const { return pos_ >= text_.size(); }
    std::size_t pos() const { return pos_; }

private:
    std::string text_;
    std::string file_;
    std::size_t pos_ = 0;
    std::size_t line_start_ = 0;
};

}  // namespace

FieldDump read_field(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open field dump " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    DumpReader rd(buf.str(), path.string());

    FieldDump d;
    if (rd.line() != "MASYS-FIELD v1") rd.fail("malformed header: expected 'MASYS-FIELD v1'", 0);
    auto number = [&](const std::string& text, const char* what) {
        try {
            return parse_double(text, what);
        } catch (const InvalidInput&) {
            rd.fail(std::string("malformed header field '") + what + "'", rd.line_start());
        }
    };
    auto integer = [&](const std::string& text, const char* what) {
        try {
            const long long v = parse_integer(text, what);
            if (v < 1 || v > 1'000'000) throw InvalidInput(what);
            return static_cast<int>(v);
        } catch (const InvalidInput&) {
            rd.fail(std::string("malformed header field '") + what + "'", rd.line_start());
        }
    };
    d.name = rd.keyed("name");
    d.nx = integer(rd.keyed("nx"), "nx");
    d.ny = integer(rd.keyed("ny"), "ny");
    d.h = number(rd.keyed("h"), "h");
    {
        const auto parts = split(rd.keyed("box"), ' ');
        if (parts.size() != 4) rd.fail("malformed header field 'box'", rd.line_start());
        d.box = {{number(parts[0], "box"), number(parts[1], "box")}, {number(parts[2], "box"), number(parts[3], "box")}};
    }
    d.domain = rd.keyed("domain");
    {
        const std::string hex = rd.keyed("domain_hash");
        std::uint64_t v = 0;
        const auto res = std::from_chars(hex.data(), hex.data() + hex.size(), v, 16);
        if (hex.size() != 16 || res.ec != std::errc{} || res.ptr != hex.data() + hex.size())
            rd.fail("malformed header field 'domain_hash'", rd.line_start());
        if (v != domain_hash(d.domain)) rd.fail("domain_hash does not match the domain description", rd.line_start());
        d.domain_hash = v;
    }
    if (rd.line() != "data") rd.fail("expected 'data'", rd.line_start());
    // The lattice implied by box and h must match the declared dimensions.
    const int nx_box = static_cast<int>(std::lround((d.box.hi.x - d.box.lo.x) / d.h)) + 1;
    const int ny_box = static_cast<int>(std::lround((d.box.hi.y - d.box.lo.y) / d.h)) + 1;
    if (nx_box != d.nx || ny_box != d.ny) rd.fail("header dimensions disagree with box and h", 0);

    d.values.reserve(static_cast<std::size_t>(d.nx) * d.ny);
    for (int j = 0; j < d.ny; ++j) {
        const std::string row = rd.line();
        if (row == "end") rd.fail("size mismatch: expected " + std::to_string(d.ny) + " rows", rd.line_start());
        const auto tokens = split(row, ' ');
        if (static_cast<int>(tokens.size()) != d.nx) {
            rd.fail("size mismatch: row " + std::to_string(j) + " has " + std::to_string(tokens.size()) +
                        " values, expected " + std::to_string(d.nx),
                    rd.line_start());
        }
        for (const auto& t : tokens) {
            if (t == "*") {
                d.values.push_back(std::numeric_limits<double>::quiet_NaN());
                continue;
            }
            double v = 0.0;
            const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
            if (res.ec != std::errc{} || res.ptr != t.data() + t.size()) rd.fail("bad value '" + t + "'", rd.line_start());
            d.values.push_back(v);
        }
    }
    if (rd.line() != "end") rd.fail("size mismatch: expected 'end' after " + std::to_string(d.ny) + " rows", rd.line_start());
    if (!rd.at_end()) rd.fail("trailing data after 'end'", rd.pos());
    return d;
}

// ---------------------------------------------------------------------------
// JSON

json to_json(const CheckReport& r) {
    json j{{"check", r.name},     {"passed", r.passed},       {"lhs", r.lhs},
           {"rhs", r.rhs},        {"margin", r.margin},       {"tolerance", r.tolerance},
           {"measured", r.measured}};
    if (!r.grid.domain.empty()) {
        j["grid"] = {{"nx", r.grid.nx},
                     {"ny", r.grid.ny},
                     {"h", r.grid.h},
                     {"interior_nodes", r.grid.interior},
                     {"stencil_pairs", r.grid.stencil_pairs},
                     {"domain", r.grid.domain}};
    }
    if (!r.locations.empty()) {
        json locs = json::array();
        for (const auto& l : r.locations) locs.push_back({{"node", l.node}, {"x", l.x}, {"y", l.y}, {"value", l.value}});
        j["locations"] = locs;
    }
    if (!r.note.empty()) j["note"] = r.note;
    return j;
}

// ---------------------------------------------------------------------------
// Command line

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot write " + path.string());
    out << text;
}

void write_plot_data(const fs::path& path, const Grid& grid, const ScalarField& f) {
    std::ostringstream os;
    os << "x,y,value\n";
    for (int n = 0; n < grid.interior_count(); ++n) {
        const Point x = grid.position(n);
        os << format_double(x.x) << ',' << format_double(x.y) << ',' << format_double(f[n]) << '\n';
    }
    write_text(path, os.str());
}

struct RunContext {
    RunConfig config;
    fs::path dir;
    std::vector<std::string> files;
    std::ostream& out;
    std::ostream& err;

    void emit_field(const Grid& grid, const ScalarField& f, const std::string& name) {
        if (config.dump_fields) {
            write_field(dir / (name + ".field"), make_dump(grid, f, name));
            files.push_back(name + ".field");
        }
        if (config.emit_plot_data) {
            write_plot_data(dir / (name + "_plot.csv"), grid, f);
            files.push_back(name + "_plot.csv");
        }
    }
    void emit(const std::string& name, const std::string& text) {
        write_text(dir / name, text);
        files.push_back(name);
    }
};

json grid_json(const Grid& g) {
    return {{"nx", g.nx()}, {"ny", g.ny()}, {"h", g.h()}, {"interior_nodes", g.interior_count()},
            {"stencil_pairs", g.stencil().pair_count()}, {"domain", g.domain().describe()}};
}

double sup(const ScalarField& x) { return x.lpNorm<Eigen::Infinity>(); }

json system_json(const SystemSolution& s, const ConvexDomain& domain) {
    const double area = domain.area();
    return {{"p", s.p},
            {"sigma", s.sigma},
            {"sigma_area_squared", s.sigma * area * area},
            {"C_estimate", std::pow(s.sigma, 1.0 + s.p / kDim)},
            {"residual_u", s.residual_u},
            {"residual_v", s.residual_v},
            {"sup_u", sup(s.u)},
            {"sup_v", sup(s.v)},
            {"sup_u_minus_v", sup(s.u - s.v)},
            {"iterations", s.history.size()}};
}

std::string system_history_csv(const SystemSolution& s) {
    std::ostringstream os;
    os << "iteration,sigma,field_change\n";
    for (std::size_t k = 0; k < s.history.size(); ++k)
        os << k << ',' << format_double(s.history[k].sigma) << ',' << format_double(s.history[k].field_change) << '\n';
    return os.str();
}

int cmd_dirichlet(RunContext& ctx, const Grid& grid, json& summary) {
    const ScalarField f = ScalarField::Constant(grid.interior_count(), ctx.config.rhs);
    const DirichletResult res = solve_dirichlet_detailed(grid, f, ctx.config.dirichlet_config());
    summary["rhs"] = ctx.config.rhs;
    summary["residual"] = res.residual;
    summary["newton_steps"] = res.newton_steps;
    summary["gauss_seidel_sweeps"] = res.gauss_seidel_sweeps;
    summary["u_min"] = res.u.size() ? res.u.minCoeff() : 0.0;
    summary["discretely_convex"] = is_discretely_convex(res.u, grid, 1e-8);
    ctx.emit_field(grid, res.u, "u");
    ctx.out << "dirichlet: residual " << res.residual << ", min u " << summary["u_min"].get<double>() << "\n";
    return 0;
}

int cmd_eigen(RunContext& ctx, const Grid& grid, json& summary) {
    const EigenPair e = solve_eigen(grid, ctx.config.spectral_config());
    const double area = grid.domain().area();
    const ScalarField resid = ma_det(e.w, grid, ctx.config.dirichlet_config().ma) -
                              e.lambda * e.w.cwiseAbs().array().pow(kDim).matrix();
    summary["lambda"] = e.lambda;
    summary["lambda_homogeneity"] = e.history.back().lambda_homogeneity;
    summary["lambda_area_squared"] = e.lambda * area * area;
    summary["sup_w"] = sup(e.w);
    summary["eigen_residual"] = sup(resid);
    summary["iterations"] = e.history.size();
    if (ctx.config.history) {
        std::ostringstream os;
        os << "iteration,lambda_rayleigh,lambda_homogeneity,field_change\n";
        for (std::size_t k = 0; k < e.history.size(); ++k) {
            const auto& h = e.history[k];
            os << k << ',' << format_double(h.lambda_rayleigh) << ',' << format_double(h.lambda_homogeneity) << ','
               << format_double(h.field_change) << '\n';
        }
        ctx.emit("history.csv", os.str());
    }
    ctx.emit_field(grid, e.w, "w");
    ctx.out << "eigen: lambda " << std::setprecision(12) << e.lambda << " after " << e.history.size()
            << " iterations\n";
    return 0;
}

int cmd_system(RunContext& ctx, const Grid& grid, json& summary) {
    const SystemSolution s = solve_system(grid, ctx.config.p, ctx.config.spectral_config());
    summary["solution"] = system_json(s, grid.domain());
    if (ctx.config.history) ctx.emit("history.csv", system_history_csv(s));
    ctx.emit_field(grid, s.u, "u");
    ctx.emit_field(grid, s.v, "v");
    ctx.out << "system: p " << s.p << " sigma " << std::setprecision(12) << s.sigma << " |u-v| " << sup(s.u - s.v)
            << "\n";
    return 0;
}

int cmd_sweep(RunContext& ctx, const Grid& grid, json& summary) {
    const auto entries = ctx.config.jobs > 1
                             ? sweep_p_parallel(grid, ctx.config.p_list, ctx.config.spectral_config(), ctx.config.jobs)
                             : sweep_p(grid, ctx.config.p_list, ctx.config.spectral_config());
    json list = json::array();
    bool all_ok = true;
    std::ostringstream hist;
    hist << "p,iteration,sigma,field_change\n";
    for (const auto& e : entries) {
        json j{{"p", e.p}, {"converged", e.solution.has_value()}};
        if (e.solution) {
            j["solution"] = system_json(*e.solution, grid.domain());
            for (std::size_t k = 0; k < e.solution->history.size(); ++k) {
                hist << format_double(e.p) << ',' << k << ',' << format_double(e.solution->history[k].sigma) << ','
                     << format_double(e.solution->history[k].field_change) << '\n';
            }
            ctx.emit_field(grid, e.solution->u, "u_p" + format_double(e.p));
            ctx.emit_field(grid, e.solution->v, "v_p" + format_double(e.p));
            ctx.out << "sweep: p " << e.p << " sigma " << std::setprecision(12) << e.solution->sigma << "\n";
        } else {
            j["error"] = e.error;
            all_ok = false;
            ctx.err << "sweep: p " << e.p << " failed: " << e.error << "\n";
        }
        list.push_back(j);
    }
    summary["entries"] = list;
    if (ctx.config.history) ctx.emit("history.csv", hist.str());
    return all_ok ? 0 : 1;
}

bool wants(const RunConfig& c, const std::string& check) {
    if (c.checks.empty()) return true;
    for (const auto& x : c.checks)
        if (x == "all" || x == check) return true;
    return false;
}

int cmd_verify(RunContext& ctx, const Grid& grid, json& summary) {
    const RunConfig& c = ctx.config;
    const SpectralConfig scfg = c.spectral_config();
    const MaOptions ma = scfg.inner.ma;
    const EigenPair eig = solve_eigen(grid, scfg);
    const SystemSolution sol = solve_system(grid, c.p, scfg);

    std::vector<CheckReport> reports;
    auto tagged = [&](CheckReport r, const std::string& tag) {
        r.name += "[" + tag + "]";
        reports.push_back(std::move(r));
    };
    if (wants(c, "nibp")) {
        tagged(check_nibp(sol.u, sol.v, grid, kNibpTolerance, ma), "u,v");
        tagged(check_nibp(sol.v, sol.u, grid, kNibpTolerance, ma), "v,u");
        tagged(check_nibp(eig.w, eig.w, grid, kNibpTolerance, ma), "w,w");
    }
    if (wants(c, "amgm")) {
        tagged(check_amgm(sol.u, sol.v, grid, 1e-8, ma), "u,v");
        tagged(check_amgm(eig.w, eig.w, grid, 1e-8, ma), "w,w");
    }
    if (wants(c, "uvn")) tagged(check_uvn_identity(sol.u, sol.v), "u,v");
    if (wants(c, "minkowski")) tagged(check_minkowski_random(1000, c.seed), "1000 random SPD pairs");
    if (wants(c, "cd1")) tagged(cd1_invariant(sol, {0.5, 1.0, 2.0, 10.0}), "s=0.5,1,2,10");
    if (wants(c, "scaling")) {
        for (double tau : {0.5, 2.0}) tagged(check_scaling_identity(sol, grid, tau, 1e-12, ma), "tau=" + format_double(tau));
    }
    if (wants(c, "sup_bound")) tagged(sup_bound_report(sol, grid.domain()), "p=" + format_double(c.p));
    if (wants(c, "distance")) {
        tagged(distance_bound_report(sol.u, grid.domain(), grid), "u");
        tagged(distance_bound_report(eig.w, grid.domain(), grid), "w");
    }
    if (wants(c, "p_equals_n") && c.p == kDim) {
        CheckReport r;
        r.name = "p_equals_n";
        r.grid = grid_info(grid);
        r.lhs = std::abs(sol.sigma - eig.lambda) / eig.lambda;
        r.rhs = sup(sol.u - sol.v);
        r.tolerance = 1e-5;
        r.measured["sigma"] = sol.sigma;
        r.measured["lambda"] = eig.lambda;
        r.measured["sup_u_minus_v"] = r.rhs;
        r.measured["sup_u_minus_w"] = sup(sol.u - eig.w);
        r.margin = std::min(1e-5 - r.lhs, 1e-5 - r.rhs);
        r.passed = r.margin >= 0.0;
        tagged(r, "sigma=lambda,u=v");
    }
    if (wants(c, "uniqueness")) {
        if (std::abs(c.p - kDim) <= 0.25) {
            UniquenessOptions opt;
            opt.seed_count = c.seed_count;
            opt.base_seed = c.seed;
            tagged(uniqueness_experiment(grid, c.p, scfg, opt), std::to_string(c.seed_count) + " seeds");
        } else {
            ctx.err << "verify: uniqueness skipped, |p - n| > 0.25\n";
        }
    }

    std::ostringstream lines;
    json table = json::array();
    bool all_passed = true;
    ctx.out << std::left << std::setw(44) << "check" << std::setw(8) << "result" << "margin\n";
    for (const auto& r : reports) {
        lines << to_json(r).dump() << "\n";
        table.push_back({{"check", r.name}, {"passed", r.passed}, {"margin", r.margin}});
        all_passed = all_passed && r.passed;
        ctx.out << std::left << std::setw(44) << r.name << std::setw(8) << (r.passed ? "PASS" : "FAIL")
                << std::setprecision(6) << r.margin << "\n";
    }
    ctx.emit("checks.jsonl", lines.str());
    summary["lambda"] = eig.lambda;
    summary["solution"] = system_json(sol, grid.domain());
    summary["checks"] = table;
    summary["all_passed"] = all_passed;
    return all_passed ? 0 : 3;
}

std::string iso_time_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

fs::path default_run_dir(const RunConfig& c) {
    const char* env = std::getenv(kOutputRootEnv);
    const fs::path root = env && *env ? fs::path(env) : fs::path("masys-runs");
    json key = c.to_json();
    key.erase("output");
    return root / (c.command + "-" + hex64(domain_hash(key.dump())).substr(0, 12));
}

}  // namespace

int run_command(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Monge-Ampere Dirichlet, eigenvalue and coupled-system solver"};
    app.set_help_flag("--help", "print this help");
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    // Raw option text keyed like the config file; applied after the file.
    std::map<std::string, std::string> raw;
    std::string config_path;
    bool all_checks = false;
    std::vector<std::string> check_flags;
    std::map<std::string, bool> switches;

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"dirichlet", "solve det D^2 u = rhs with u = 0 on the boundary"},
        {"eigen", "Monge-Ampere eigenvalue and eigenfunction"},
        {"system", "coupled system at exponent p"},
        {"sweep", "coupled system over a list of exponents"},
        {"verify", "solve and run the verification checks"}};
    const std::vector<std::pair<std::string, std::string>> valued = {
        {"domain", "domain, e.g. disk:1, square:1, ellipse:2,1, rect:0,0,2,1, polygon:0,0;1,0;0,1"},
        {"h", "grid spacing"},
        {"stencil", "number of orthogonal direction pairs (2..8)"},
        {"penalty", "weight of negative parts in the operator"},
        {"rhs", "constant right-hand side (dirichlet)"},
        {"method", "newton or gauss_seidel"},
        {"tol_residual", "Dirichlet residual tolerance"},
        {"inner_tol", "inner Dirichlet tolerance for spectral solves"},
        {"max_outer_iterations", "Dirichlet iteration cap"},
        {"damping", "initial Newton step length"},
        {"regularization", "Jacobian smoothing width"},
        {"tol_lambda", "relative eigenvalue / sigma change tolerance"},
        {"tol_field", "sup-norm field change tolerance"},
        {"system_tol_residual", "coupled-system residual bound (times 1 + sigma)"},
        {"max_iterations", "outer iteration cap for eigen/system"},
        {"p", "system exponent"},
        {"p_list", "comma-separated exponents (sweep)"},
        {"seed", "random seed"},
        {"seed_count", "random starts in the uniqueness experiment"},
        {"out", "run directory"},
        {"jobs", "concurrent solves in sweep (cold starts when > 1)"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->set_help_flag("--help", "print this help");
        sub->add_option("--config", config_path, "line-oriented key = value config file");
        for (const auto& [key, text] : valued) {
            std::string flag = key;
            std::replace(flag.begin(), flag.end(), '_', '-');
            sub->add_option("--" + flag, raw[key], text);
        }
        sub->add_flag("--all", all_checks, "run every check (verify)");
        sub->add_option("--check", check_flags, "run only the named check (repeatable)");
        sub->add_flag("--emit-plot-data", switches["emit_plot_data"], "write x,y,value CSV files");
        sub->add_flag("--dump-fields", switches["dump_fields"], "write field dumps");
        sub->add_flag("--history", switches["history"], "write convergence history CSV");
        sub->add_flag("-v,--verbose", switches["verbose"], "progress on stderr");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    RunContext ctx{{}, {}, {}, out, err};
    RunConfig& cfg = ctx.config;
    int code = 0;
    std::string error;
    json summary;
    const auto t0 = std::chrono::steady_clock::now();
    const std::string started = iso_time_now();
    try {
        cfg.command = app.get_subcommands().front()->get_name();
        if (!config_path.empty()) load_config_file(cfg, config_path);
        for (const auto& [key, value] : raw) {
            if (value.empty()) continue;
            cfg.set(key == "out" ? "output" : key, value, "--" + key);
        }
        if (all_checks) cfg.checks = {"all"};
        if (!check_flags.empty()) {
            std::string joined;
            for (const auto& c : check_flags) joined += (joined.empty() ? "" : ",") + c;
            cfg.set("checks", joined, "--check");
        }
        if (switches["emit_plot_data"]) cfg.emit_plot_data = true;
        if (switches["dump_fields"]) cfg.dump_fields = true;
        if (switches["history"]) cfg.history = true;
        if (switches["verbose"]) cfg.verbosity = std::max(cfg.verbosity, 1);
        cfg.validate();

        ctx.dir = cfg.output.empty() ? default_run_dir(cfg) : fs::path(cfg.output);
        fs::create_directories(ctx.dir);

        const Grid grid = build_grid(parse_domain(cfg.domain), cfg.h, StencilSet{cfg.stencil});
        summary = json{{"command", cfg.command}, {"grid", grid_json(grid)}};
        if (cfg.command == "dirichlet") code = cmd_dirichlet(ctx, grid, summary);
        else if (cfg.command == "eigen") code = cmd_eigen(ctx, grid, summary);
        else if (cfg.command == "system") code = cmd_system(ctx, grid, summary);
        else if (cfg.command == "sweep") code = cmd_sweep(ctx, grid, summary);
        else code = cmd_verify(ctx, grid, summary);
    } catch (const InvalidInput& e) {
        code = 2;
        error = e.what();
    } catch (const NoConvergence& e) {
        code = 1;
        error = e.what();
    } catch (const std::exception& e) {
        code = 2;
        error = e.what();
    }
    if (!error.empty()) {
        err << "error: " << error << "\n";
        summary["error"] = error;
    }
    if (ctx.dir.empty()) return code;

    summary["exit_code"] = code;
    try {
        ctx.emit("summary.json", summary.dump(2) + "\n");
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::vector<std::string> args(argv, argv + argc);
        const json manifest{{"tool", "masys"},
                            {"version", kToolVersion},
                            {"argv", args},
                            {"config", cfg.to_json()},
                            {"started_at", started},
                            {"elapsed_seconds", elapsed},
                            {"exit_code", code},
                            {"files", ctx.files}};
        write_text(ctx.dir / "manifest.json", manifest.dump(2) + "\n");
        out << "results in " << ctx.dir.string() << "\n";
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return code;
}

}  // namespace masys
