#include "otafeel/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace otafeel {

namespace {
constexpr double kSpeedOfLight = 2.998e8;

void check(std::vector<std::string>& errs, bool ok, const std::string& msg) {
    if (!ok) errs.push_back(msg);
}

void raise_if_any(const std::vector<std::string>& errs, const std::string& what) {
    if (errs.empty()) return;
    std::ostringstream oss;
    oss << what << ":";
    for (const auto& e : errs) oss << " [" << e << "]";
    throw std::invalid_argument(oss.str());
}
}  // namespace

double SystemConfig::wavelength() const { return kSpeedOfLight / carrier_hz; }

void SystemConfig::validate() const {
    std::vector<std::string> errs;
    check(errs, N >= 1, "N must be >= 1");
    check(errs, K >= 1, "K must be >= 1");
    check(errs, L >= N, "L must be >= N so W*D admits a left pseudo-inverse");
    check(errs, M >= 1, "M must be >= 1");
    check(errs, P_d > 0, "P_d must be > 0");
    check(errs, P_u > 0, "P_u must be > 0");
    check(errs, sigma2_ps > 0, "sigma2_ps must be > 0");
    check(errs, sigma2_k > 0, "sigma2_k must be > 0");
    check(errs, gamma >= 0, "gamma must be >= 0");
    check(errs, Gamma0 > 0, "Gamma0 must be > 0");
    check(errs, eps0 > 0, "eps0 must be > 0");
    check(errs, delta >= 0 && delta <= 1, "delta must be in [0,1]");
    check(errs, tau0 >= 0 && tau0 <= 1, "tau0 must be in [0,1]");
    check(errs, carrier_hz > 0, "carrier_hz must be > 0");
    check(errs, bandwidth_hz > 0, "bandwidth_hz must be > 0");
    check(errs, D_in > 0, "D_in must be > 0");
    check(errs, D_in < D_out, "D_in must be < D_out");
    check(errs, eps_c > 0, "eps_c must be > 0");
    check(errs, eps_t > 0, "eps_t must be > 0");
    check(errs, sigma_rcs > 0, "sigma_rcs must be > 0");
    check(errs, d_target > 0, "d_target must be > 0");
    check(errs, antenna_spacing > 0, "antenna_spacing must be > 0");
    raise_if_any(errs, "invalid SystemConfig");
}

void TrainConfig::validate() const {
    std::vector<std::string> errs;
    check(errs, rounds >= 1, "rounds must be >= 1");
    check(errs, local_steps >= 1, "local_steps must be >= 1");
    check(errs, lr >= 0, "lr must be >= 0");
    check(errs, batch >= 0, "batch must be >= 0");
    check(errs, reg > 0, "reg must be > 0");
    check(errs, alpha_dir > 0, "alpha_dir must be > 0");
    check(errs, n_samples >= 1, "n_samples must be >= 1");
    check(errs, feature_dim >= 1, "feature_dim must be >= 1");
    raise_if_any(errs, "invalid TrainConfig");
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r\n");
            if (b == std::string::npos) return std::string{};
            const auto e = s.find_last_not_of(" \t\r\n");
            return s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') continue;  // section header
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        " is not key=value: " + line);
        }
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

std::pair<std::string, std::string> parse_override(const std::string& s) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw std::invalid_argument("--set expects key=value, got: " + s);
    }
    return {s.substr(0, eq), s.substr(eq + 1)};
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value);

template <>
double parse_number<double>(const std::string& key, const std::string& value) {
    size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("bad numeric value for " + key);
    return v;
}

template <>
int parse_number<int>(const std::string& key, const std::string& value) {
    size_t pos = 0;
    long v = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("bad integer value for " + key);
    return static_cast<int>(v);
}

template <>
std::uint64_t parse_number<std::uint64_t>(const std::string& key, const std::string& value) {
    size_t pos = 0;
    unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("bad integer value for " + key);
    return static_cast<std::uint64_t>(v);
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw std::invalid_argument("bad boolean value for " + key);
}

}  // namespace

void apply_config(SystemConfig& sys, TrainConfig& train,
                  const std::map<std::string, std::string>& kv) {
    std::vector<std::string> unknown;
    using Setter = std::function<void(const std::string&, const std::string&)>;
    const std::map<std::string, Setter> setters = {
        {"N", [&](auto& k, auto& v) { sys.N = parse_number<int>(k, v); }},
        {"K", [&](auto& k, auto& v) { sys.K = parse_number<int>(k, v); }},
        {"L", [&](auto& k, auto& v) { sys.L = parse_number<int>(k, v); }},
        {"M", [&](auto& k, auto& v) { sys.M = parse_number<int>(k, v); }},
        {"P_d", [&](auto& k, auto& v) { sys.P_d = parse_number<double>(k, v); }},
        {"P_u", [&](auto& k, auto& v) { sys.P_u = parse_number<double>(k, v); }},
        {"sigma2_ps", [&](auto& k, auto& v) { sys.sigma2_ps = parse_number<double>(k, v); }},
        {"sigma2_k", [&](auto& k, auto& v) { sys.sigma2_k = parse_number<double>(k, v); }},
        {"gamma", [&](auto& k, auto& v) { sys.gamma = parse_number<double>(k, v); }},
        {"Gamma0", [&](auto& k, auto& v) { sys.Gamma0 = parse_number<double>(k, v); }},
        {"eps0", [&](auto& k, auto& v) { sys.eps0 = parse_number<double>(k, v); }},
        {"delta", [&](auto& k, auto& v) { sys.delta = parse_number<double>(k, v); }},
        {"tau0", [&](auto& k, auto& v) { sys.tau0 = parse_number<double>(k, v); }},
        {"carrier_hz", [&](auto& k, auto& v) { sys.carrier_hz = parse_number<double>(k, v); }},
        {"bandwidth_hz", [&](auto& k, auto& v) { sys.bandwidth_hz = parse_number<double>(k, v); }},
        {"D_in", [&](auto& k, auto& v) { sys.D_in = parse_number<double>(k, v); }},
        {"D_out", [&](auto& k, auto& v) { sys.D_out = parse_number<double>(k, v); }},
        {"eps_c", [&](auto& k, auto& v) { sys.eps_c = parse_number<double>(k, v); }},
        {"eps_t", [&](auto& k, auto& v) { sys.eps_t = parse_number<double>(k, v); }},
        {"sigma_rcs", [&](auto& k, auto& v) { sys.sigma_rcs = parse_number<double>(k, v); }},
        {"d_target", [&](auto& k, auto& v) { sys.d_target = parse_number<double>(k, v); }},
        {"theta_target", [&](auto& k, auto& v) { sys.theta_target = parse_number<double>(k, v); }},
        {"antenna_spacing",
         [&](auto& k, auto& v) { sys.antenna_spacing = parse_number<double>(k, v); }},
        {"seed", [&](auto& k, auto& v) { sys.seed = parse_number<std::uint64_t>(k, v); }},
        {"alpha_random_phase", [&](auto& k, auto& v) { sys.alpha_random_phase = parse_bool(k, v); }},
        {"snr_min_over_devices",
         [&](auto& k, auto& v) { sys.snr_min_over_devices = parse_bool(k, v); }},
        {"rounds", [&](auto& k, auto& v) { train.rounds = parse_number<int>(k, v); }},
        {"local_steps", [&](auto& k, auto& v) { train.local_steps = parse_number<int>(k, v); }},
        {"lr", [&](auto& k, auto& v) { train.lr = parse_number<double>(k, v); }},
        {"batch", [&](auto& k, auto& v) { train.batch = parse_number<int>(k, v); }},
        {"reg", [&](auto& k, auto& v) { train.reg = parse_number<double>(k, v); }},
        {"alpha_dir", [&](auto& k, auto& v) { train.alpha_dir = parse_number<double>(k, v); }},
        {"n_samples", [&](auto& k, auto& v) { train.n_samples = parse_number<int>(k, v); }},
        {"feature_dim", [&](auto& k, auto& v) { train.feature_dim = parse_number<int>(k, v); }},
        {"class_sep", [&](auto& k, auto& v) { train.class_sep = parse_number<double>(k, v); }},
        {"sensing_enabled", [&](auto& k, auto& v) { train.sensing_enabled = parse_bool(k, v); }},
        {"echo_enabled", [&](auto& k, auto& v) { train.echo_enabled = parse_bool(k, v); }},
    };
    for (const auto& [key, value] : kv) {
        auto it = setters.find(key);
        if (it == setters.end()) {
            unknown.push_back(key);
            continue;
        }
        it->second(key, value);
    }
    if (!unknown.empty()) {
        std::ostringstream oss;
        oss << "unknown config keys:";
        for (const auto& k : unknown) oss << " " << k;
        throw std::invalid_argument(oss.str());
    }
}

}  // namespace otafeel
