#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "masys/verification.hpp"

namespace masys {

inline constexpr const char* kToolVersion = "1.0.0";
/// Environment variable naming the default root for run directories.
inline constexpr const char* kOutputRootEnv = "MASYS_OUTPUT_ROOT";

/// Parses "disk:1", "disk:cx,cy,r", "square:s", "rect:x0,y0,x1,y1",
/// "ellipse:a,b[,rotation]", "ellipse:cx,cy,a,b,rotation",
/// "polygon:x,y;x,y;...". Throws InvalidInput.
ConvexDomain parse_domain(const std::string& spec);

/// Fully validated run configuration. Every field has a config-file key of
/// the same name.
struct RunConfig {
    std::string command;
    std::string domain = "disk:1";
    double h = 1.0 / 32.0;
    int stencil = 2;
    double penalty = 1.0;
    double rhs = 1.0;
    std::string method = "newton";
    double tol_residual = 1e-8;
    double inner_tol = 1e-10;
    int max_outer_iterations = 10000;
    double damping = 1.0;
    double regularization = 0.0;
    double tol_lambda = 1e-10;
    double tol_field = 1e-9;
    double system_tol_residual = 1e-8;
    int max_iterations = 500;
    double p = 2.0;
    std::vector<double> p_list;
    std::uint64_t seed = 0;
    int seed_count = 3;
    std::vector<std::string> checks;
    std::string output;
    bool emit_plot_data = false;
    bool dump_fields = false;
    bool history = false;
    int jobs = 1;
    int verbosity = 0;

    /// Sets one field from its text form; `context` prefixes error messages.
    void set(const std::string& key, const std::string& value, const std::string& context);
    void validate() const;

    SolverConfig dirichlet_config() const;
    SpectralConfig spectral_config() const;
    nlohmann::json to_json() const;
};

/// Applies a line-oriented "key = value" file ('#' starts a comment).
/// Errors name the file, line and key.
void load_config_file(RunConfig& config, const std::filesystem::path& path);

/// Field dump: a text format with a header and row-major lattice values,
/// '*' marking exterior nodes. Values use shortest round-trip decimal form.
struct FieldDump {
    int version = 1;
    std::string name;
    int nx = 0;
    int ny = 0;
    double h = 0.0;
    Box box;
    std::string domain;
    std::uint64_t domain_hash = 0;
    std::vector<double> values;  // nx*ny, NaN at exterior nodes
};

std::uint64_t domain_hash(const std::string& domain_description);
FieldDump make_dump(const Grid& grid, const ScalarField& field, const std::string& name);
/// Interior values of a dump taken on the same lattice as `grid`.
ScalarField field_from_dump(const FieldDump& dump, const Grid& grid);
void write_field(const std::filesystem::path& path, const FieldDump& dump);
/// Throws InvalidInput with the byte offset of the first problem.
FieldDump read_field(const std::filesystem::path& path);

nlohmann::json to_json(const CheckReport& report);

/// Entry point of the command-line tool. Exit codes: 0 success, 1 solver
/// nonconvergence, 2 invalid input, 3 a verification check failed.
int run_command(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace masys
