// Acceptance suite: one PASS/FAIL line per criterion, details indented below.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "masys/cli_io.hpp"
#include "masys/verification.hpp"
#include "radial_oracle.hpp"

using namespace masys;
namespace fs = std::filesystem;

namespace {

// Tolerances, fixed by the acceptance criteria.
constexpr double kC1MaxError = 5e-3;
constexpr double kC1MinOrder = 1.0;
constexpr double kC1MaxSeconds = 60.0;
constexpr double kC1Roundoff = 1e-9;  // errors below this are exact-arithmetic noise
constexpr double kC2RelTol = 0.02;
constexpr double kC3RelTol = 0.01;
constexpr double kC4FieldTol = 1e-5;
constexpr double kC4SigmaRelTol = 1e-5;
constexpr double kC5SigmaTol = 1e-5;
constexpr double kC5FieldTol = 1e-4;
constexpr int kC5Seeds = 3;
constexpr double kC6Tol = 1e-12;
constexpr double kC7Tol = 1e-10;
constexpr int kC8MinkowskiPairs = 1000;
constexpr double kC9DiskTol = 0.01;
constexpr double kC9Spread = 100.0;
constexpr SupBoundWindow kC9RatioWindow{1e-2, 1e2};
constexpr double kC10Factor = 3.0;

constexpr double kH = 1.0 / 32;      // working grid for criteria 4-10
constexpr double kHFine = 1.0 / 64;  // criteria 1-3

double sup(const ScalarField& x) { return x.lpNorm<Eigen::Infinity>(); }

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

struct Criterion {
    bool passed = true;
    std::vector<std::string> lines;
    void note(const std::string& s) { lines.push_back(s); }
    void require(bool ok, const std::string& s) {
        passed = passed && ok;
        lines.push_back(std::string(ok ? "ok   " : "FAIL ") + s);
    }
};

// A converged solution on a known grid, kept for the inequality suite.
struct Stored {
    std::string label;
    const Grid* grid;
    SystemSolution sol;
};
struct StoredField {
    std::string label;
    const Grid* grid;
    ScalarField field;
};

struct State {
    SpectralConfig cfg;
    std::vector<std::unique_ptr<Grid>> grids;
    std::vector<Stored> systems;
    std::vector<StoredField> eigenfunctions;
    std::vector<StoredField> dirichlet;
    double lambda_b1 = 0.0;        // disk r=1, kHFine
    double lambda_b2 = 0.0;        // disk r=2, 2 kHFine
    double lambda_square_h = 0.0;  // square, kH
    const Grid* disk_fine = nullptr;

    const Grid* grid(const ConvexDomain& d, double h, int pairs = 2) {
        grids.push_back(std::make_unique<Grid>(d, h, StencilSet{pairs}));
        return grids.back().get();
    }
};

const ConvexDomain kDisk = ConvexDomain::disk({0, 0}, 1.0);
const ConvexDomain kSquare = ConvexDomain::square(1.0);

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void c1(State& st, Criterion& c) {
    std::vector<double> hs = {1.0 / 16, 1.0 / 32, 1.0 / 64}, errs;
    for (double h : hs) {
        const Grid* g = st.grid(kDisk, h);
        const auto t0 = std::chrono::steady_clock::now();
        const ScalarField u = solve_dirichlet(*g, ScalarField::Ones(g->interior_count()), st.cfg.inner);
        const double t = seconds_since(t0);
        const ScalarField exact = sample(*g, [](Point x) { return 0.5 * (x.x * x.x + x.y * x.y - 1.0); });
        errs.push_back(sup(u - exact));
        c.require(t <= kC1MaxSeconds, "h=" + fmt(h) + " solve " + fmt(t) + " s (limit " + fmt(kC1MaxSeconds) + ")");
        if (h == kHFine) {
            st.dirichlet.push_back({"dirichlet f=1 disk h=1/64", g, u});
            st.disk_fine = g;
        }
    }
    for (std::size_t i = 0; i < hs.size(); ++i) c.note("h=" + fmt(hs[i]) + " max error " + fmt(errs[i]));
    c.require(errs.back() <= kC1MaxError, "error at h=1/64 " + fmt(errs.back()) + " <= " + fmt(kC1MaxError));
    const double worst = *std::max_element(errs.begin(), errs.end());
    if (worst <= kC1Roundoff) {
        // The scheme reproduces this quadratic exactly; refinement cannot reduce roundoff.
        c.require(true, "all errors <= " + fmt(kC1Roundoff) +
                            ": discrete solution exact up to roundoff, order bound holds trivially (not measurable)");
    } else {
        for (std::size_t i = 0; i + 1 < errs.size(); ++i) {
            const double order = std::log2(errs[i] / errs[i + 1]);
            c.require(order >= kC1MinOrder, "order " + fmt(hs[i]) + " -> " + fmt(hs[i + 1]) + ": " + fmt(order));
        }
    }
}

void c2(State& st, Criterion& c) {
    const double oracle_now = oracle::disk_eigenvalue();
    c.require(std::abs(oracle_now - oracle::kFrozenDiskEigenvalue) <= 1e-9 * oracle::kFrozenDiskEigenvalue,
              "radial shooting oracle " + fmt(oracle_now) + " matches frozen value");
    const EigenPair e = solve_eigen(*st.disk_fine, st.cfg);
    const double rel = std::abs(e.lambda - oracle_now) / oracle_now;
    c.require(rel <= kC2RelTol, "lambda[B1] h=1/64 = " + fmt(e.lambda) + ", relative error " + fmt(rel));
    st.eigenfunctions.push_back({"eigen disk h=1/64", st.disk_fine, e.w});

    const Grid* b2 = st.grid(ConvexDomain::disk({0, 0}, 2.0), 2.0 * kHFine);
    const EigenPair e2 = solve_eigen(*b2, st.cfg);
    st.eigenfunctions.push_back({"eigen disk r=2 h=2/64", b2, e2.w});
    // criterion 3 shares the two solves
    st.lambda_b1 = e.lambda;
    st.lambda_b2 = e2.lambda;
}

void c3(State& st, Criterion& c) {
    const double l1 = st.lambda_b1, l2 = st.lambda_b2;
    const double rel = std::abs(16.0 * l2 - l1) / l1;
    c.require(rel <= kC3RelTol, "16 lambda[B2] = " + fmt(16.0 * l2) + " vs lambda[B1] = " + fmt(l1) +
                                    ", relative difference " + fmt(rel));
}

void c4(State& st, Criterion& c) {
    for (const auto& [name, dom] : {std::pair{"disk", kDisk}, std::pair{"square", kSquare}}) {
        const Grid* g = st.grid(dom, kH);
        const EigenPair e = solve_eigen(*g, st.cfg);
        const SystemSolution s = solve_system(*g, 2.0, st.cfg);
        const double du = sup(s.u - s.v), ds = std::abs(s.sigma - e.lambda);
        c.require(du <= kC4FieldTol, std::string(name) + " |u - v| = " + fmt(du));
        c.require(ds <= kC4SigmaRelTol * e.lambda,
                  std::string(name) + " sigma = " + fmt(s.sigma) + ", lambda = " + fmt(e.lambda) +
                      ", relative gap " + fmt(ds / e.lambda));
        st.eigenfunctions.push_back({std::string("eigen ") + name + " h=1/32", g, e.w});
        st.systems.push_back({std::string("system p=2 ") + name, g, s});
        if (std::string(name) == "square") st.lambda_square_h = e.lambda;
    }
}

void c5(State& st, Criterion& c) {
    UniquenessOptions opt;
    opt.seed_count = kC5Seeds;
    opt.sigma_tol = kC5SigmaTol;
    opt.field_tol = kC5FieldTol;
    for (const auto& [name, dom] : {std::pair{"disk", kDisk}, std::pair{"square", kSquare}}) {
        const Grid* g = st.grid(dom, kH);
        for (double p : {1.8, 2.2}) {
            std::vector<SystemSolution> sols;
            const CheckReport r = uniqueness_experiment(*g, p, st.cfg, opt, &sols);
            c.require(r.passed, std::string(name) + " p=" + fmt(p) + ": sigma spread " +
                                    fmt(r.measured.at("sigma_relative_spread")) + ", field spread " +
                                    fmt(r.measured.at("field_spread")));
            for (std::size_t k = 0; k < sols.size(); ++k)
                st.systems.push_back({std::string("system p=") + fmt(p) + " " + name + " seed " + std::to_string(k), g,
                                      sols[k]});
        }
    }
}

void c6(State& st, Criterion& c) {
    for (const auto& s : st.systems) {
        if (s.label.find("disk") == std::string::npos) continue;
        if (s.sol.p != 2.0 && s.sol.p != 2.2) continue;
        if (s.label.find("seed") != std::string::npos && s.label.find("seed 0") == std::string::npos) continue;
        for (double tau : {0.5, 2.0}) {
            const CheckReport r = check_scaling_identity(s.sol, *s.grid, tau, kC6Tol);
            c.require(r.passed, s.label + " tau=" + fmt(tau) + ": max relative defect " + fmt(-r.margin));
        }
    }
}

void c7(State& st, Criterion& c) {
    double worst = 0.0;
    bool ok = true;
    for (const auto& s : st.systems) {
        const CheckReport r = cd1_invariant(s.sol, {0.5, 1.0, 2.0, 10.0}, kC7Tol);
        ok = ok && r.passed;
        worst = std::max(worst, r.measured.at("max_relative_defect"));
    }
    c.require(ok, std::to_string(st.systems.size()) + " solutions, worst relative defect " + fmt(worst));
}

void c8(State& st, Criterion& c) {
    int count = 0;
    double worst_nibp = INFINITY;
    bool nibp_ok = true, amgm_ok = true, uvn_ok = true;
    auto pair = [&](const ScalarField& u, const ScalarField& v, const Grid& g, const std::string& label) {
        for (const auto& r : {check_nibp(u, v, g), check_nibp(v, u, g)}) {
            worst_nibp = std::min(worst_nibp, r.measured.at("relative_margin"));
            if (!r.passed) c.note("FAIL nibp " + label + " relative margin " + fmt(r.measured.at("relative_margin")));
            nibp_ok = nibp_ok && r.passed;
        }
        const CheckReport a = check_amgm(u, v, g);
        if (!a.passed) c.note("FAIL amgm " + label);
        amgm_ok = amgm_ok && a.passed;
        const CheckReport w = check_uvn_identity(u, v);
        if (!w.passed) c.note("FAIL uvn " + label);
        uvn_ok = uvn_ok && w.passed;
        ++count;
    };
    for (const auto& s : st.systems) pair(s.sol.u, s.sol.v, *s.grid, s.label);
    for (const auto& e : st.eigenfunctions) pair(e.field, e.field, *e.grid, e.label);
    for (const auto& d : st.dirichlet) {
        for (const auto& e : st.eigenfunctions)
            if (e.grid == d.grid) pair(d.field / sup(d.field), e.field, *d.grid, d.label + " with " + e.label);
    }
    const CheckReport mk = check_minkowski_random(kC8MinkowskiPairs, 0);
    c.require(nibp_ok, "nibp on " + std::to_string(count) + " pairs, both orders; worst relative margin " +
                           fmt(worst_nibp) + " (slack " + fmt(kNibpTolerance) + ")");
    c.require(amgm_ok, "amgm on " + std::to_string(count) + " pairs");
    c.require(uvn_ok, "uvn identity on " + std::to_string(count) + " pairs");
    c.require(mk.passed, "minkowski on " + std::to_string(kC8MinkowskiPairs) + " random SPD pairs, worst margin " +
                             fmt(mk.margin));
}

void c9(State& st, Criterion& c) {
    const Grid* d1 = st.grid(kDisk, kH);
    const Grid* d2 = st.grid(ConvexDomain::disk({0, 0}, 2.0), 2.0 * kH);
    const ConvexDomain ellipse = ConvexDomain::ellipse({0, 0}, 2.0, 1.0);
    const Grid* ge = st.grid(ellipse, 2.0 * kH);
    const Grid* gs = st.grid(kSquare, kH);
    const SystemSolution s1 = solve_system(*d1, 2.0, st.cfg), s2 = solve_system(*d2, 2.0, st.cfg);
    const SystemSolution se = solve_system(*ge, 2.0, st.cfg), ss = solve_system(*gs, 2.0, st.cfg);
    const double a1 = s1.sigma * std::pow(kDisk.area(), 2), a2 = s2.sigma * std::pow(d2->domain().area(), 2);
    c.require(std::abs(a1 - a2) <= kC9DiskTol * a1,
              "disk r=1 sigma|O|^2 = " + fmt(a1) + ", r=2 = " + fmt(a2) + ", relative " + fmt(std::abs(a1 - a2) / a1));
    const CheckReport fam = sup_bound_family({{"disk", 2.0, s1.sigma, kDisk.area()},
                                              {"square", 2.0, ss.sigma, kSquare.area()},
                                              {"ellipse 2:1", 2.0, se.sigma, ellipse.area()}},
                                             kC9Spread);
    std::string values;
    for (const auto& [k, v] : fam.measured) values += " " + k + "=" + fmt(v);
    c.require(fam.passed, "family max/min " + fmt(fam.lhs) + " <= " + fmt(kC9Spread) + ":" + values);
    st.systems.push_back({"system p=2 ellipse 2:1", ge, se});
    double lo = INFINITY, hi = 0.0;
    bool ok = true;
    for (const auto& s : st.systems) {
        const CheckReport r = sup_bound_report(s.sol, s.grid->domain(), {}, kC9RatioWindow);
        lo = std::min(lo, r.rhs);
        hi = std::max(hi, r.rhs);
        ok = ok && r.rhs >= kC9RatioWindow.lo && r.rhs <= kC9RatioWindow.hi;
    }
    c.require(ok, "|u|^(n/p)/|v| over " + std::to_string(st.systems.size()) + " solutions in [" + fmt(lo) + ", " +
                      fmt(hi) + "]");
}

void c10(State& st, Criterion& c) {
    // Discretization parameters are h and the angular resolution of the stencil;
    // the error at (h, K) is estimated by refining each one.
    const ConvexDomain rotated = apply_unimodular(kSquare, Mat2::rotation(std::numbers::pi / 6));
    const double sq = st.lambda_square_h;
    const double rot = solve_eigen(*st.grid(rotated, kH), st.cfg).lambda;
    const double sq_half = solve_eigen(*st.grid(kSquare, kH / 2), st.cfg).lambda;
    const double sq_k4 = solve_eigen(*st.grid(kSquare, kH, 4), st.cfg).lambda;
    const double err_h = std::abs(sq - sq_half), err_angle = std::abs(sq - sq_k4);
    const double err = std::max(err_h, err_angle);
    const double gap = std::abs(sq - rot);
    c.note("lambda square " + fmt(sq) + ", rotated " + fmt(rot) + ", gap " + fmt(gap));
    c.note("h-refinement change " + fmt(err_h) + " (h=1/64: " + fmt(sq_half) + "), stencil change " + fmt(err_angle) +
           " (4 pairs: " + fmt(sq_k4) + ")");
    c.note(std::string("gap vs ") + fmt(kC10Factor) + " x h-refinement change alone: " +
           (gap <= kC10Factor * err_h ? "within" : "outside"));
    c.require(gap <= kC10Factor * err, "gap " + fmt(gap) + " <= " + fmt(kC10Factor) + " x " + fmt(err));
}

void c11(State&, Criterion& c) {
    const fs::path root = fs::temp_directory_path() / ("masys_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    const std::vector<std::pair<std::string, std::vector<std::string>>> runs = {
        {"c1 dirichlet", {"dirichlet", "--domain", "disk:1", "--h", "0.0625"}},
        {"c2 eigen", {"eigen", "--domain", "disk:1", "--h", "0.0625"}},
        {"c4 system", {"system", "--domain", "square:1", "--p", "2", "--h", "0.0625"}},
        {"c5 uniqueness", {"verify", "--check", "uniqueness", "--p", "2.2", "--h", "0.0625", "--seed", "0"}},
        {"c8 inequalities", {"verify", "--check", "nibp,amgm,uvn,minkowski", "--h", "0.0625", "--seed", "0"}},
    };
    int k = 0;
    for (const auto& [label, args] : runs) {
        std::string first;
        bool same = true;
        for (int rep = 0; rep < 2; ++rep) {
            std::vector<std::string> a = args;
            a.insert(a.begin(), "masys");
            a.push_back("--out");
            a.push_back((root / (std::to_string(k) + "_" + std::to_string(rep))).string());
            std::vector<const char*> argv;
            for (const auto& s : a) argv.push_back(s.c_str());
            std::ostringstream out, err;
            const int code = run_command(static_cast<int>(argv.size()), argv.data(), out, err);
            std::ifstream in(root / (std::to_string(k) + "_" + std::to_string(rep)) / "summary.json", std::ios::binary);
            std::ostringstream text;
            text << in.rdbuf();
            if (code != 0) same = false;
            if (rep == 0) first = text.str();
            else same = same && !first.empty() && text.str() == first;
        }
        c.require(same, label + ": summary.json byte-identical across two runs");
        ++k;
    }
    fs::remove_all(root);
}

}  // namespace

int main() {
    State st;
    const std::vector<std::pair<std::string, std::function<void(State&, Criterion&)>>> criteria = {
        {"1  Dirichlet exactness (disk, f=1)", c1},
        {"2  eigenvalue of the unit disk vs radial oracle", c2},
        {"3  eigenvalue scaling lambda[B2]*16 = lambda[B1]", c3},
        {"4  p = n system reproduces the eigenpair", c4},
        {"5  uniqueness near p = n", c5},
        {"6  scaling family residual identity", c6},
        {"7  gamma mu^(p/n) invariant", c7},
        {"8  inequality suite on converged solutions", c8},
        {"9  sigma |Omega|^2 bounds", c9},
        {"10 unimodular invariance (square vs rotated square)", c10},
        {"11 determinism of JSON summaries", c11},
    };
    int failed = 0;
    const auto t_all = std::chrono::steady_clock::now();
    for (const auto& [name, fn] : criteria) {
        Criterion c;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            fn(st, c);
        } catch (const std::exception& e) {
            c.require(false, std::string("exception: ") + e.what());
        }
        if (!c.passed) ++failed;
        std::printf("%s criterion %s  (%.1f s)\n", c.passed ? "PASS" : "FAIL", name.c_str(), seconds_since(t0));
        for (const auto& l : c.lines) std::printf("       %s\n", l.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed (%.1f s)\n", static_cast<int>(criteria.size()) - failed, criteria.size(),
                seconds_since(t_all));
    return failed;
}
