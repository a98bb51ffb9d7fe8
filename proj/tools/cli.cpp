#include "cli.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <random>

#include <CLI11.hpp>

#include "ksreg/canonical.hpp"
#include "ksreg/dynamics.hpp"
#include "ksreg/hjsolver.hpp"
#include "ksreg/io.hpp"
#include "ksreg/verify.hpp"

namespace ksreg::cli {
namespace {

struct RunConfig {
    double mu = 0.01;
    double energy = -1.8;
    double kappa = 0.0;
    double alpha = 0.0;
    double sigma = 1e-3;
    double r_max = 0.15;
    double span = 0.0;
    double rtol = 1e-12;
    double atol = 1e-14;
    std::string nu = "1,0,0,0";
    std::string state;
    std::string out;
    std::string format = "json";
    std::string suite = "all";
    std::string system = "ks";
    std::string chart;
    int order = kDefaultOrder;
    int body = 2;
    std::uint64_t seed = 42;
    long samples = 1000;
    bool reverse = false;
    bool oracle = false;
    bool backward = false;
    bool no_scan = false;
    bool lift = false;
    bool nu_columns = false;
};

// Options common to several subcommands. Returns the option pointers that
// a handler may need to test for presence.
struct Shared {
    CLI::Option* energy = nullptr;
    CLI::Option* kappa = nullptr;
};

Shared add_physics(CLI::App* sc, RunConfig& c) {
    Shared s;
    sc->add_option("--mu", c.mu, "mass parameter of the secondary")->capture_default_str();
    s.energy = sc->add_option("--energy", c.energy, "energy level E")->capture_default_str();
    return s;
}

void add_order(CLI::App* sc, RunConfig& c) {
    sc->add_option("--order", c.order, "truncation order N of the series")
        ->check(CLI::Range(1, kMaxOrder))
        ->capture_default_str();
}

void add_output(CLI::App* sc, RunConfig& c, bool csv) {
    sc->add_option("--out", c.out, "output file (default: standard output)");
    if (csv)
        sc->add_option("--format", c.format, "json or csv")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
    else
        sc->add_option("--format", c.format, "json")->check(CLI::IsMember({"json"}))->capture_default_str();
}

void emit(const RunConfig& c, const std::string& text, std::ostream& out) {
    if (c.out.empty()) {
        out << text;
        return;
    }
    std::ofstream f(c.out, std::ios::binary);
    if (!f) throw UsageError("cannot open output file " + c.out);
    f << text;
    if (!f) throw Error("write failed: " + c.out);
}

Vec4 parse_vec4(const std::string& s) {
    const auto v = parse_number_list(s, 4);
    return Vec4(v[0], v[1], v[2], v[3]);
}

CanonicalOptions canonical_options(const RunConfig& c) {
    CanonicalOptions o;
    o.order = c.order;
    o.r_max = c.r_max;
    o.scan_radius = !c.no_scan;
    return o;
}

const char* error_kind(const std::exception& e) {
    if (dynamic_cast<const ParameterError*>(&e)) return "ParameterError";
    if (dynamic_cast<const ChartDomainError*>(&e)) return "ChartDomainError";
    if (dynamic_cast<const CollisionError*>(&e)) return "CollisionError";
    if (dynamic_cast<const DomainError*>(&e)) return "DomainError";
    if (dynamic_cast<const InversionError*>(&e)) return "InversionError";
    if (dynamic_cast<const ConvergenceError*>(&e)) return "ConvergenceError";
    if (dynamic_cast<const AccuracyError*>(&e)) return "AccuracyError";
    if (dynamic_cast<const SingularityApproachError*>(&e)) return "SingularityApproachError";
    if (dynamic_cast<const DimensionError*>(&e)) return "DimensionError";
    return "Error";
}

bool is_usage_error(const std::exception& e) {
    return dynamic_cast<const ParseError*>(&e) || dynamic_cast<const UsageError*>(&e) ||
           dynamic_cast<const ParameterError*>(&e);
}

double relative_deviation(const Vec6& a, const Vec6& b) {
    return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), 1e-300);
}

Json vec_json(const VecX& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

// Inbound state on the sphere |X| = sigma, direction and angle to the inward
// normal drawn from `rng`.
PlanetoState sampled_entry(std::mt19937_64& rng, double sigma, double energy, double mu) {
    std::normal_distribution<double> g;
    const Vec3 q = Vec3(g(rng), g(rng), g(rng)).normalized();
    Vec3 t(g(rng), g(rng), g(rng));
    t = (t - t.dot(q) * q).normalized();
    const double th = std::uniform_real_distribution<double>(0.3, 1.2)(rng);
    return sphere_entry(q, -std::cos(th) * q + std::sin(th) * t, sigma, energy, mu);
}

// ---------------------------------------------------------------------------

int cmd_series(const RunConfig& c, const Shared& sh, std::ostream& out, std::ostream& err) {
    Params p;
    p.mu = c.mu;
    p.energy = c.energy;
    p.nu = parse_vec4(c.nu);
    CompleteIntegral ci;
    double level;
    if (sh.kappa->count() > 0) {
        p.kappa = c.kappa;
        ci = assemble_W(solve_wtilde(p, c.order));
        level = c.kappa;
    } else {
        ci = complete_integral(p, c.order);
        level = ci.params.kappa;
    }
    const SeriesDocument doc = series_document(ci);
    if (c.format == "csv") {
        CsvTable t;
        t.header = {"i1", "i2", "i3", "i4", "val"};
        for (const auto& term : doc.coeffs)
            t.rows.push_back({double(term.exp[0]), double(term.exp[1]), double(term.exp[2]), double(term.exp[3]), term.val});
        emit(c, to_csv(t), out);
    } else {
        emit(c, dump_json(to_json(doc)), out);
    }
    const double res = max_abs_coeff(ks_residual(ci.w, level, c.mu, c.energy), 0, c.order - 1);
    std::ostream& log = c.out.empty() ? err : out;
    log << "series: order " << c.order << ", " << doc.coeffs.size() << " nonzero coefficients, "
        << "max HJ residual coefficient through degree " << c.order - 1 << " = " << format_double(res)
        << " (" << format_double(res / std::sqrt(8 * c.mu)) << " sqrt(8 mu))\n";
    return kExitOk;
}

int cmd_encounter(const RunConfig& c, const Shared& sh, std::ostream& out, std::ostream& err) {
    Params p;
    p.mu = c.mu;
    p.energy = c.energy;
    p.body = c.body;
    if (c.body != 1 && c.body != 2) throw UsageError("--body must be 1 or 2");
    const double mu_eff = body_mu(c.mu, c.body);

    PlanetoState entry;
    if (!c.state.empty()) {
        const auto v = parse_number_list(c.state, 6);
        entry = PlanetoState::unpack(Vec6(Eigen::Map<const Vec6>(v.data())));
        if (sh.energy->count() == 0) p.energy = ham_planeto(entry, mu_eff);
    } else {
        std::mt19937_64 rng(c.seed);
        entry = sampled_entry(rng, c.sigma, p.energy, mu_eff);
    }

    EncounterOptions opt;
    opt.canonical = canonical_options(c);
    opt.direction = c.backward ? -1 : +1;
    if (c.chart == "plus") opt.chart = Chart::PlusX;
    else if (c.chart == "minus") opt.chart = Chart::MinusX;

    Json doc;
    try {
        const EncounterResult r = encounter_map(entry, c.sigma, p, opt);
        doc = to_json(r);
        if (c.reverse) {
            EncounterOptions back = opt;
            back.direction = -opt.direction;
            back.chart.reset();
            const EncounterResult rr = encounter_map(r.exit, c.sigma, p, back);
            Json rev;
            rev["entry"] = vec_json(rr.exit.packed());
            rev["t_exit"] = rr.t_exit;
            rev["deviation"] = relative_deviation(rr.exit.packed(), entry.packed());
            doc["reverse"] = std::move(rev);
        }
        if (c.oracle) {
            const double sigma = c.sigma;
            EventSpec ev{[sigma](const VecX& y) { return y.head<3>().norm() - sigma; }, +1};
            const Trajectory ct = integrate({HamiltonianId::Planetocentric, mu_eff, p.energy, true}, entry.packed(),
                                            opt.direction * 1.0, {}, {}, ev);
            Json orc;
            orc["event_found"] = ct.event_found;
            if (ct.event_found) {
                const Vec6 ex = ct.final_state().head<6>();
                orc["exit"] = vec_json(ex);
                orc["t_exit"] = ct.event_x;
                orc["deviation"] = relative_deviation(r.exit.packed(), ex);
                orc["t_deviation"] = std::abs(ct.event_x - r.t_exit);
            }
            doc["oracle"] = std::move(orc);
        }
    } catch (const Error& e) {
        if (is_usage_error(e)) throw;
        Json j;
        j["entry"] = vec_json(entry.packed());
        j["error"] = {{"type", error_kind(e)}, {"message", e.what()}};
        emit(c, dump_json(j), out);
        err << "encounter: " << error_kind(e) << ": " << e.what() << "\n";
        return kExitFailure;
    }
    emit(c, dump_json(doc), out);
    return kExitOk;
}

int cmd_propagate(const RunConfig& c, const Shared& sh, std::ostream& out, std::ostream& err) {
    SystemSpec sys;
    if (c.system == "ks") sys.id = HamiltonianId::KS;
    else if (c.system == "lc") sys.id = HamiltonianId::LeviCivita;
    else if (c.system == "planeto") sys.id = HamiltonianId::Planetocentric;
    else sys.id = HamiltonianId::Barycentric;
    sys.mu = c.mu;
    sys.energy = c.energy;

    VecX y0;
    if (c.lift) {
        if (sys.id == HamiltonianId::KS) {
            const auto v = parse_number_list(c.state, 6);
            const PlanetoState s = PlanetoState::unpack(Vec6(Eigen::Map<const Vec6>(v.data())));
            if (sh.energy->count() == 0) sys.energy = ham_planeto(s, c.mu);
            y0 = chart_lift(s).packed();
        } else if (sys.id == HamiltonianId::LeviCivita) {
            const auto v = parse_number_list(c.state, 4);
            const PlanarState s{Vec2(v[0], v[1]), Vec2(v[2], v[3])};
            if (sh.energy->count() == 0)
                sys.energy = ham_planeto(PlanetoState{Vec3(v[0], v[1], 0), Vec3(v[2], v[3], 0)}, c.mu);
            const PlanarKSState l = lc_lift(s);
            y0.resize(4);
            y0 << l.u, l.U;
        } else {
            throw UsageError("--lift applies to --system ks or lc");
        }
    } else {
        const auto v = parse_number_list(c.state, state_dimension(sys.id));
        y0 = Eigen::Map<const VecX>(v.data(), static_cast<Eigen::Index>(v.size()));
    }

    Tolerances tol;
    tol.rel = c.rtol;
    tol.abs = c.atol;
    Trajectory tr;
    try {
        tr = integrate(sys, y0, c.span, tol);
    } catch (const SingularityApproachError& e) {
        err << "propagate: " << e.what() << "\n";
        return kExitFailure;
    }

    NuColumn nu;
    std::optional<Chi4> chi;
    std::optional<Vec4> last;
    if (c.nu_columns && sys.id == HamiltonianId::KS) {
        chi.emplace(c.mu, sys.energy, canonical_options(c));
        nu = [&](const KSState& s) -> std::optional<Vec4> {
            if (s.u.norm() > chi->trusted_radius()) return std::nullopt;
            try {
                last = chi->nu_hat(s, last).nu;
                return last;
            } catch (const Error&) {
                last.reset();
                return std::nullopt;
            }
        };
    }
    const CsvTable table = trajectory_table(tr, nu);
    emit(c, c.format == "csv" ? to_csv(table) : dump_json(to_json(table)), out);
    return kExitOk;
}

int cmd_verify(const RunConfig& c, std::ostream& out, std::ostream& err) {
    const VerifyReport rep = run_verify(c.suite, c.samples, c.seed);
    emit(c, dump_json(to_json(rep)), out);
    if (rep.passed()) return kExitOk;
    for (const auto& f : rep.failures()) err << "verify: FAILED " << f << "\n";
    return kExitFailure;
}

int cmd_lc(const RunConfig& c, std::ostream& out, std::ostream& err) {
    const double kj2 = 1e-10, klin = 1e-12, kcross = 1e-7;
    const PlanarHJSolution sol = solve_planar(c.alpha, c.kappa, c.energy, c.mu, c.order);

    const int sweep = static_cast<int>(std::min(c.samples, 32L));
    double j2_dev = 0.0;
    for (int i = 0; i < sweep; ++i) {
        const double a = -std::numbers::pi + 2 * std::numbers::pi * i / sweep;
        j2_dev = std::max(j2_dev, std::abs(std::abs(j2(a, c.kappa, c.energy, c.mu, std::min(c.order, 6))) - 4.0));
    }
    double lin_dev = 0.0;
    const double w = std::sqrt(8 * (c.mu + c.kappa));
    for (double a : {0.0, std::numbers::pi / 4, std::numbers::pi / 2}) {
        const PlanarHJSolution s = solve_planar(a, c.kappa, c.energy, c.mu, c.order);
        lin_dev = std::max({lin_dev, std::abs(s.w2.coeff({1, 0, 0, 0}) - w * std::cos(a)),
                            std::abs(s.w2.coeff({0, 1, 0, 0}) - w * std::sin(a))});
    }

    std::mt19937_64 rng(c.seed);
    const double phi = std::uniform_real_distribution<double>(-std::numbers::pi, std::numbers::pi)(rng);
    const double th = std::uniform_real_distribution<double>(-1.2, 1.2)(rng);
    const Vec3 q(std::cos(phi), std::sin(phi), 0.0), t(-std::sin(phi), std::cos(phi), 0.0);
    const PlanetoState entry = sphere_entry(q, -std::cos(th) * q + std::sin(th) * t, c.sigma, c.energy, c.mu);
    Params p;
    p.mu = c.mu;
    p.energy = c.energy;
    EncounterOptions eo;
    eo.canonical = canonical_options(c);
    eo.canonical.order = 12;
    const EncounterResult spatial = encounter_map(entry, c.sigma, p, eo);
    const PlanarEncounterResult planar = planar_encounter_map(entry, c.sigma, p, eo);
    const double cross = (spatial.exit.packed() - planar.exit.packed()).cwiseAbs().maxCoeff();

    const bool ok = j2_dev <= kj2 && lin_dev <= klin && cross <= kcross;
    Json doc;
    doc["series"] = to_json(series_document(sol));
    Json checks;
    checks["j2_magnitude"] = {{"alphas", sweep}, {"max_deviation", j2_dev}, {"tolerance", kj2}};
    checks["linear_coefficients"] = {{"max_deviation", lin_dev}, {"tolerance", klin}};
    Json cr;
    cr["entry"] = vec_json(entry.packed());
    cr["spatial_exit"] = vec_json(spatial.exit.packed());
    cr["planar_exit"] = vec_json(planar.exit.packed());
    cr["alpha"] = planar.alpha;
    cr["kappa"] = planar.kappa;
    cr["max_deviation"] = cross;
    cr["tolerance"] = kcross;
    checks["planar_vs_spatial"] = std::move(cr);
    doc["checks"] = std::move(checks);
    doc["passed"] = ok;
    emit(c, dump_json(doc), out);
    if (!ok) err << "lc: check failed\n";
    return ok ? kExitOk : kExitFailure;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Kustaanheimo-Stiefel close-encounter toolkit for the circular restricted three-body problem",
                 "ksreg"};
    app.set_config("--config", "", "key=value file supplying defaults; flags on the command line win");
    app.require_subcommand(1);

    RunConfig series_cfg, enc_cfg, prop_cfg, ver_cfg, lc_cfg;
    enc_cfg.order = 12;
    prop_cfg.format = "csv";

    CLI::App* series = app.add_subcommand("series", "build the complete integral W(u; nu) and export its coefficients");
    Shared series_sh = add_physics(series, series_cfg);
    series->add_option("--nu", series_cfg.nu, "parameters nu as a,b,c,d")->capture_default_str();
    series_sh.kappa = series->add_option("--kappa", series_cfg.kappa,
                                         "solve the particular integral at this level instead of mu(|nu|^2 - 1)");
    add_order(series, series_cfg);
    add_output(series, series_cfg, true);

    CLI::App* enc = app.add_subcommand("encounter", "close-encounter map through the complete integral");
    Shared enc_sh = add_physics(enc, enc_cfg);
    enc->add_option("--sigma", enc_cfg.sigma, "radius of the encounter sphere")->capture_default_str();
    enc->add_option("--state", enc_cfg.state,
                    "entry state X,Y,Z,PX,PY,PZ relative to the body (default: sampled on the sphere from --seed)");
    enc->add_option("--body", enc_cfg.body, "1 or 2")->capture_default_str();
    enc->add_option("--chart", enc_cfg.chart, "lift chart")->check(CLI::IsMember({"plus", "minus"}));
    enc->add_option("--seed", enc_cfg.seed, "seed for the sampled entry")->capture_default_str();
    enc->add_option("--rmax", enc_cfg.r_max, "trusted radius cap in |u|")->capture_default_str();
    enc->add_flag("--no-scan", enc_cfg.no_scan, "skip the residual scan of the trusted radius");
    enc->add_flag("--backward", enc_cfg.backward, "propagate backward in time");
    enc->add_flag("--reverse", enc_cfg.reverse, "map the exit state back and report the round-trip deviation");
    enc->add_flag("--oracle", enc_cfg.oracle, "also integrate the Cartesian equations and report the deviation");
    add_order(enc, enc_cfg);
    add_output(enc, enc_cfg, false);

    CLI::App* prop = app.add_subcommand("propagate", "integrate one of the Hamiltonian formulations");
    Shared prop_sh = add_physics(prop, prop_cfg);
    prop->add_option("--system", prop_cfg.system, "ks, lc, planeto or bary")
        ->check(CLI::IsMember({"ks", "lc", "planeto", "bary"}))
        ->capture_default_str();
    prop->add_option("--state", prop_cfg.state, "initial state in the layout of --system")->required();
    prop->add_option("--span", prop_cfg.span, "span of the independent variable (s or t)")->required();
    prop->add_flag("--lift", prop_cfg.lift, "--state is Cartesian (6 values for ks, X,Y,PX,PY for lc)");
    prop->add_option("--rtol", prop_cfg.rtol, "relative tolerance")->capture_default_str();
    prop->add_option("--atol", prop_cfg.atol, "absolute tolerance")->capture_default_str();
    prop->add_flag("--nu-columns", prop_cfg.nu_columns, "fill nu1..nu4 with nu-hat inside the trusted ball");
    prop->add_option("--rmax", prop_cfg.r_max, "trusted radius cap in |u|")->capture_default_str();
    add_order(prop, prop_cfg);
    add_output(prop, prop_cfg, true);

    CLI::App* ver = app.add_subcommand("verify", "run the seeded invariant suites");
    ver->add_option("--suite", ver_cfg.suite, "algebra, kscore, hj, canonical, dynamics or all")->capture_default_str();
    ver->add_option("--samples", ver_cfg.samples, "random samples per suite (capped for the costly suites)")
        ->capture_default_str();
    ver->add_option("--seed", ver_cfg.seed, "64-bit seed")->capture_default_str();
    add_output(ver, ver_cfg, false);

    CLI::App* lc = app.add_subcommand("lc", "planar Levi-Civita integral, |j2| sweep and planar/spatial comparison");
    add_physics(lc, lc_cfg);
    lc->add_option("--kappa", lc_cfg.kappa, "level kappa of the planar integral")->capture_default_str();
    lc->add_option("--alpha", lc_cfg.alpha, "angle alpha of the exported series")->capture_default_str();
    lc->add_option("--sigma", lc_cfg.sigma, "encounter sphere radius")->capture_default_str();
    lc->add_option("--rmax", lc_cfg.r_max, "trusted radius cap in |u|")->capture_default_str();
    lc->add_option("--seed", lc_cfg.seed, "seed for the planar entry")->capture_default_str();
    lc->add_option("--samples", lc_cfg.samples, "alpha values in the j2 sweep (at most 32)")->capture_default_str();
    add_order(lc, lc_cfg);
    add_output(lc, lc_cfg, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*series) return cmd_series(series_cfg, series_sh, out, err);
        if (*enc) return cmd_encounter(enc_cfg, enc_sh, out, err);
        if (*prop) return cmd_propagate(prop_cfg, prop_sh, out, err);
        if (*ver) return cmd_verify(ver_cfg, out, err);
        return cmd_lc(lc_cfg, out, err);
    } catch (const std::exception& e) {
        if (is_usage_error(e)) {
            err << "error: " << e.what() << "\n";
            return kExitUsage;
        }
        err << "error: " << error_kind(e) << ": " << e.what() << "\n";
        return kExitFailure;
    }
}

}  // namespace ksreg::cli
