#include "ouentry/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <tuple>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "ouentry/entry.hpp"
#include "ouentry/investment.hpp"
#include "ouentry/mc.hpp"
#include "ouentry/model.hpp"
#include "ouentry/numerics.hpp"
#include "ouentry/ou.hpp"

namespace ouentry {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string opt_g17(const std::optional<double>& v) { return v ? g17(*v) : ""; }

std::ofstream open_out(const fs::path& dir, const std::string& name, std::ostream& log) {
    fs::create_directories(dir);
    const fs::path p = dir / name;
    std::ofstream f(p);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    log << "wrote " << p.string() << "\n";
    return f;
}

void write_reference_points(const RunConfig& cfg, std::ostream& log) {
    auto f = open_out(cfg.out_dir, "reference_points.csv", log);
    f << "c,x0,xhat0,xbar0,xtilde,x1_0,x2_0,xdag0\n";
    for (double c : cfg.c_grid_points()) {
        const auto r = reference_points(cfg.params, c);
        f << g17(c) << "," << opt_g17(r.x0) << "," << opt_g17(r.xhat0) << "," << opt_g17(r.xbar0)
          << "," << opt_g17(r.xtilde) << "," << opt_g17(r.x1_0) << "," << opt_g17(r.x2_0) << ","
          << opt_g17(r.xdag0) << "\n";
    }
}

std::string case_tag(const EntryRecord& rec) {
    if (rec.rcase != RepellingCase::NA) return to_string(rec.rcase);
    return to_string(rec.rbranch);
}

/// Box-constraint check for the reported topology; empty string when satisfied.
std::string check_record_boxes(const ModelParams& params, const EntryRecord& rec) {
    if (!rec.error.empty() || rec.topology == EntryTopology::StopNowTrivial) return "";
    const auto ref = reference_points(params, rec.c);
    std::ostringstream os;
    if (rec.topology == EntryTopology::SingleThreshold) {
        double bound = std::numeric_limits<double>::infinity();
        switch (rec.rcase) {
            case RepellingCase::I:
            case RepellingCase::IIIa: bound = *ref.x1_0; break;
            case RepellingCase::II: bound = *ref.x2_0; break;
            default: break;  // reflecting: l* <= x0(c) enforced by the solver bracket
        }
        if (!(rec.l1 < bound)) {
            os << "threshold " << rec.l1 << " not below its reference point " << bound;
            return os.str();
        }
        return "";
    }
    const double g = rec.gamma_star.value_or(0.0);
    if (!(rec.l1 < *ref.x1_0 && g < rec.l2 && rec.l2 <= rec.l3 && rec.l3 <= *ref.x2_0)) {
        os << "triple (" << rec.l1 << ", " << rec.l2 << ", " << rec.l3
           << ") violates the box (x1_0=" << *ref.x1_0 << ", gamma=" << g
           << ", x2_0=" << *ref.x2_0 << ")";
        return os.str();
    }
    return "";
}

struct Pipeline {
    RegimeInfo info;
    ControlBoundary boundary;
    GainFunction gain;
    EntrySolver solver;

    Pipeline(const RunConfig& cfg, RegimeInfo regime_info, const SolveOptions& opt)
        : info(regime_info),
          boundary(ControlBoundary::tabulate(cfg.params, info, opt)),
          gain(cfg.params, boundary),
          solver(gain, opt) {}
};

SolveOptions make_options(const RunConfig& cfg) {
    SolveOptions opt;
    opt.c_grid_n = cfg.c_grid;
    opt.root_tol = cfg.tol;
    return opt;
}

}  // namespace

int cmd_classify(const RunConfig& cfg, std::ostream& log) {
    try {
        cfg.validate();
    } catch (const std::exception& e) {
        log << "validation error: " << e.what() << "\n";
        return kExitValidation;
    }
    const RegimeInfo info = classify_regime(cfg.params);
    log << "regime = " << to_string(info.regime) << "\n";
    log << "k(0) = " << g17(k_of(cfg.params, 0.0)) << ", k(1) = " << g17(k_of(cfg.params, 1.0))
        << "\n";
    if (info.chat) {
        log << "chat (root of k) = " << g17(*info.chat) << "\n";
    } else {
        log << "chat: no sign change of k located (diagnostic)\n";
    }
    if (info.regime == Regime::Unsupported) {
        log << "note: the regime with chat in [0,1] is the open case; boundary solvers reject it\n";
    }

    write_reference_points(cfg, log);

    json j;
    j["regime"] = to_string(info.regime);
    j["k0"] = k_of(cfg.params, 0.0);
    j["k1"] = k_of(cfg.params, 1.0);
    if (info.chat) j["chat"] = *info.chat;
    auto f = open_out(cfg.out_dir, "classify.json", log);
    f << j.dump(2) << "\n";
    return kExitOk;
}

int cmd_boundaries(const RunConfig& cfg, std::ostream& log) {
    try {
        cfg.validate();
    } catch (const std::exception& e) {
        log << "validation error: " << e.what() << "\n";
        return kExitValidation;
    }
    const RegimeInfo info = classify_regime(cfg.params);
    if (info.regime == Regime::Unsupported) {
        log << "solver error: regime Unsupported (k changes sign on [0,1], the open case)\n";
        return kExitSolver;
    }
    try {
        const SolveOptions opt = make_options(cfg);
        Pipeline pipe(cfg, info, opt);

        const auto cs = cfg.c_grid_points();
        {
            auto f = open_out(cfg.out_dir, "control_boundary.csv", log);
            f << "c,beta_or_gamma\n";
            for (std::size_t i = 0; i < cs.size(); ++i) {
                f << g17(pipe.boundary.grid_c()[i]) << "," << g17(pipe.boundary.grid_value()[i])
                  << "\n";
            }
        }
        write_reference_points(cfg, log);

        const auto records = pipe.solver.solve_grid(cs, true);
        bool any_failed = false;
        auto f = open_out(cfg.out_dir, "entry_boundaries.csv", log);
        f << "c,topology,l1,l2,l3,case_tag,m1,m2,error\n";
        for (auto rec : records) {
            if (rec.error.empty()) {
                const std::string box = check_record_boxes(cfg.params, rec);
                if (!box.empty()) rec.error = box;
            }
            if (!rec.error.empty()) any_failed = true;
            const bool triple = rec.topology == EntryTopology::TripleBoundary;
            const bool trivial = rec.topology == EntryTopology::StopNowTrivial;
            f << g17(rec.c) << "," << (rec.error.empty() ? to_string(rec.topology) : "") << ","
              << (rec.error.empty() && !trivial ? g17(rec.l1) : "") << ","
              << (rec.error.empty() && triple ? g17(rec.l2) : "") << ","
              << (rec.error.empty() && triple ? g17(rec.l3) : "") << "," << case_tag(rec) << ","
              << opt_g17(rec.m1) << "," << opt_g17(rec.m2) << "," << rec.error << "\n";
        }
        if (any_failed) {
            log << "solver error: at least one c-row failed (see error column)\n";
            return kExitSolver;
        }
        return kExitOk;
    } catch (const std::exception& e) {
        log << "solver error: " << e.what() << "\n";
        return kExitSolver;
    }
}

int cmd_value_surface(const RunConfig& cfg, std::ostream& log) {
    try {
        cfg.validate();
    } catch (const std::exception& e) {
        log << "validation error: " << e.what() << "\n";
        return kExitValidation;
    }
    const RegimeInfo info = classify_regime(cfg.params);
    if (info.regime == Regime::Unsupported) {
        log << "solver error: regime Unsupported\n";
        return kExitSolver;
    }
    try {
        const SolveOptions opt = make_options(cfg);
        Pipeline pipe(cfg, info, opt);
        const auto xs = cfg.x_grid_points();

        auto f = open_out(cfg.out_dir, "value_surface.csv", log);
        f << "x,c,U,U_minus_P0,V,in_stopping_region\n";
        for (double c : cfg.c_grid_points()) {
            const EntryRecord rec = pipe.solver.solve_entry(c);
            const EntryValue V = pipe.solver.make_value(rec);
            for (double x : xs) {
                const double u = pipe.gain.U(x, c);
                const double um = u - cfg.params.p0;
                const double v = V(x);
                const double scale = std::max(1.0, std::abs(um));
                const bool stopping = std::abs(v - um) <= 1e-9 * scale;
                f << g17(x) << "," << g17(c) << "," << g17(u) << "," << g17(um) << "," << g17(v)
                  << "," << (stopping ? 1 : 0) << "\n";
            }
        }
        return kExitOk;
    } catch (const std::exception& e) {
        log << "solver error: " << e.what() << "\n";
        return kExitSolver;
    }
}

namespace {

struct Check {
    std::string name;
    bool pass;
    std::string detail;
};

}  // namespace

int cmd_verify(const RunConfig& cfg, std::ostream& log) {
    try {
        cfg.validate();
    } catch (const std::exception& e) {
        log << "validation error: " << e.what() << "\n";
        return kExitValidation;
    }
    const RegimeInfo info = classify_regime(cfg.params);
    if (info.regime == Regime::Unsupported) {
        log << "solver error: regime Unsupported\n";
        return kExitSolver;
    }
    try {
        const SolveOptions opt = make_options(cfg);
        Pipeline pipe(cfg, info, opt);
        const ModelParams& p = cfg.params;
        const double sd = p.stationary_sd();

        std::vector<Check> checks;
        mc::McOptions mco;
        mco.n_paths = cfg.mc_paths;
        mco.dt = cfg.mc_dt;
        mco.horizon = cfg.mc_horizon;
        mco.seed = cfg.seed;

        // 1. closed-form vs MC hitting-time Laplace transforms
        const std::vector<std::tuple<double, double, double>> hit_probes = {
            {p.mu, p.mu - sd, p.lambda},          {p.mu - sd, p.mu, p.lambda},
            {p.mu + sd, p.mu, p.lambda + p.theta}, {p.mu, p.mu + 0.5 * sd, 2.0 * p.lambda},
            {p.mu + 2.0 * sd, p.mu + sd, p.lambda}, {p.mu - 2.0 * sd, p.mu - sd, p.lambda}};
        mc::McOptions hit_opt = mco;
        hit_opt.n_paths = std::min<std::size_t>(cfg.mc_paths, 100000);
        for (const auto& [x, y, rate] : hit_probes) {
            const double analytic = hitting_laplace(p, x, y, rate);
            const auto r = mc::hitting_laplace_mc(p, x, y, rate, hit_opt);
            const double tol = 3.0 * r.std_error + 0.02 * analytic;
            std::ostringstream d;
            d << "x=" << g17(x) << " y=" << g17(y) << " rate=" << g17(rate) << " analytic="
              << g17(analytic) << " mc=" << g17(r.estimate) << " se=" << g17(r.std_error)
              << " tol=" << g17(tol);
            checks.push_back({"hitting_laplace", std::abs(analytic - r.estimate) <= tol, d.str()});
        }

        // 2. entry-value agreement at the configured probes
        auto probes = cfg.verify_probes;
        if (probes.empty()) {
            probes = {{p.mu, 0.0}, {p.mu, 0.25}, {p.mu - sd, 0.5}};
        }
        std::map<double, EntryRecord> recs;
        std::map<double, mc::UEvaluator> uevals;
        for (const auto& [x, c] : probes) {
            if (!recs.count(c)) {
                recs.emplace(c, pipe.solver.solve_entry(c));
                uevals.emplace(c, mc::UEvaluator::build(pipe.gain, c));
            }
        }
        for (const auto& [x, c] : probes) {
            const auto& rec = recs.at(c);
            const double v = pipe.solver.entry_value_V(x, rec);
            const auto r = mc::simulate_entry_payoff(p, uevals.at(c), x,
                                                     mc::PolicySpec::from_record(rec), mco);
            const double tol = 3.0 * r.std_error;
            std::ostringstream d;
            d << "x=" << g17(x) << " c=" << g17(c) << " V=" << g17(v) << " mc=" << g17(r.estimate)
              << " se=" << g17(r.std_error);
            checks.push_back({"entry_payoff", std::abs(v - r.estimate) <= tol, d.str()});
        }

        // 3. full cost functional vs V (repelling decoupling check)
        if (info.regime == Regime::Repelling) {
            std::size_t count = 0;
            for (const auto& [x, c] : probes) {
                if (count++ >= 3) break;
                const auto& rec = recs.at(c);
                const double v = pipe.solver.entry_value_V(x, rec);
                const auto r = mc::simulate_full_functional(
                    p, mc::PolicySpec::from_record(rec),
                    rec.gamma_star ? *rec.gamma_star : pipe.boundary.solve_exact(c), x, mco);
                std::ostringstream d;
                d << "x=" << g17(x) << " c=" << g17(c) << " V=" << g17(v) << " mc="
                  << g17(r.estimate) << " se=" << g17(r.std_error);
                checks.push_back(
                    {"full_functional", std::abs(v - r.estimate) <= 3.0 * r.std_error, d.str()});
            }
        } else {
            checks.push_back({"full_functional", true,
                              "skipped: repelling-only check (reflecting regime configured)"});
        }

        // 4. perturbation optimality at the first probe
        {
            const auto& [x, c] = probes.front();
            const auto& rec = recs.at(c);
            const auto rep = mc::perturbation_test(p, uevals.at(c), x,
                                                   mc::PolicySpec::from_record(rec), 0.5 * sd, mco);
            for (const auto& row : rep.rows) {
                std::ostringstream d;
                d << "shift " << row.label << " diff=" << g17(row.diff) << " pooled_se="
                  << g17(row.pooled_se) << (row.clamped ? " (clamped)" : "");
                checks.push_back(
                    {"perturbation", row.diff <= 2.0 * row.pooled_se, d.str()});
            }
        }

        bool all_pass = true;
        auto f = open_out(cfg.out_dir, "verify_report.txt", log);
        for (const auto& ch : checks) {
            all_pass = all_pass && ch.pass;
            f << (ch.pass ? "PASS" : "FAIL") << " " << ch.name << ": " << ch.detail << "\n";
        }
        f << (all_pass ? "ALL CHECKS PASSED" : "VERIFICATION FAILED") << "\n";

        json j;
        j["seed"] = cfg.seed;
        j["all_pass"] = all_pass;
        j["checks"] = json::array();
        for (const auto& ch : checks) {
            j["checks"].push_back({{"name", ch.name}, {"pass", ch.pass}, {"detail", ch.detail}});
        }
        auto js = open_out(cfg.out_dir, "verify_summary.json", log);
        js << j.dump(2) << "\n";

        if (!all_pass) {
            log << "verification failed (see verify_report.txt)\n";
            return kExitVerification;
        }
        return kExitOk;
    } catch (const std::exception& e) {
        log << "solver error: " << e.what() << "\n";
        return kExitSolver;
    }
}

}  // namespace ouentry
