#include "ouentry/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ouentry {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<double> parse_doubles(const std::string& v, const std::string& key) {
    std::vector<double> out;
    std::istringstream is(v);
    double d;
    while (is >> d) out.push_back(d);
    if (out.empty() || !is.eof()) {
        throw std::invalid_argument("config: cannot parse numbers for '" + key + "': " + v);
    }
    return out;
}

double parse_double(const std::string& v, const std::string& key) {
    const auto xs = parse_doubles(v, key);
    if (xs.size() != 1) throw std::invalid_argument("config: expected one number for '" + key + "'");
    return xs[0];
}

}  // namespace

RunConfig RunConfig::from_string(const std::string& text) {
    RunConfig cfg;
    std::vector<double> phi_coeffs;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));

        if (key == "mu") cfg.params.mu = parse_double(val, key);
        else if (key == "theta") cfg.params.theta = parse_double(val, key);
        else if (key == "sigma") cfg.params.sigma = parse_double(val, key);
        else if (key == "lambda") cfg.params.lambda = parse_double(val, key);
        else if (key == "p0") cfg.params.p0 = parse_double(val, key);
        else if (key == "phi_coeffs") phi_coeffs = parse_doubles(val, key);
        else if (key == "c_grid") cfg.c_grid = static_cast<int>(parse_double(val, key));
        else if (key == "x_min") cfg.x_min = parse_double(val, key);
        else if (key == "x_max") cfg.x_max = parse_double(val, key);
        else if (key == "x_grid") cfg.x_grid = static_cast<int>(parse_double(val, key));
        else if (key == "tol") cfg.tol = parse_double(val, key);
        else if (key == "mc_paths") cfg.mc_paths = static_cast<std::size_t>(parse_double(val, key));
        else if (key == "mc_dt") cfg.mc_dt = parse_double(val, key);
        else if (key == "mc_horizon") cfg.mc_horizon = parse_double(val, key);
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_double(val, key));
        else if (key == "out_dir") cfg.out_dir = val;
        else if (key == "verify_probes") {
            // "x:c x:c ..." pairs
            std::istringstream ps(val);
            std::string tok;
            while (ps >> tok) {
                const auto colon = tok.find(':');
                if (colon == std::string::npos) {
                    throw std::invalid_argument("config: verify_probes entries are x:c pairs");
                }
                cfg.verify_probes.emplace_back(std::stod(tok.substr(0, colon)),
                                               std::stod(tok.substr(colon + 1)));
            }
        } else {
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": unknown key '" + key + "'");
        }
    }
    if (phi_coeffs.empty()) {
        throw std::invalid_argument("config: phi_coeffs is required (coefficients of (1-c)^j, j>=1)");
    }
    cfg.params.penalty = Penalty(std::move(phi_coeffs));
    return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << f.rdbuf();
    return from_string(buf.str());
}

void RunConfig::validate() const {
    params.validate();
    if (c_grid < 3) throw std::invalid_argument("config: c_grid must be >= 3");
    if (x_grid < 2) throw std::invalid_argument("config: x_grid must be >= 2");
    if (!(tol > 0.0)) throw std::invalid_argument("config: tol must be > 0");
    if (mc_paths < 2) throw std::invalid_argument("config: mc_paths must be >= 2");
    if (!(mc_dt > 0.0)) throw std::invalid_argument("config: mc_dt must be > 0");
    if (x_min != 0.0 || x_max != 0.0) {
        if (!(x_min < x_max)) throw std::invalid_argument("config: need x_min < x_max");
    }
}

std::vector<double> RunConfig::c_grid_points() const {
    std::vector<double> cs(c_grid);
    for (int i = 0; i < c_grid; ++i) cs[i] = static_cast<double>(i) / (c_grid - 1);
    return cs;
}

std::vector<double> RunConfig::x_grid_points() const {
    double lo = x_min, hi = x_max;
    if (lo == 0.0 && hi == 0.0) {
        const double sd = params.stationary_sd();
        lo = params.mu - 4.0 * sd;
        hi = params.mu + 4.0 * sd;
    }
    std::vector<double> xs(x_grid);
    for (int i = 0; i < x_grid; ++i) {
        xs[i] = lo + (hi - lo) * static_cast<double>(i) / (x_grid - 1);
    }
    return xs;
}

}  // namespace ouentry
