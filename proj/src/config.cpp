#include "swarch/config.hpp"

#include "kv.hpp"
#include "swarch/errors.hpp"

#include <cstdio>
#include <sstream>

namespace swarch {

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void RunConfig::apply(const std::map<std::string, std::string>& values) {
    for (const auto& [key, value] : values) {
        auto num = [&] { return kv::to_double(key, value); };
        auto integer = [&] { return kv::to_long(key, value); };
        if (key == "D") params.D = num();
        else if (key == "nu") params.nu = num();
        else if (key == "alpha") params.alpha = num();
        else if (key == "beta") params.beta = num();
        else if (key == "M") params.M = static_cast<int>(integer());
        else if (key == "mu") params.mu = num();
        else if (key == "r") params.r = num();
        else if (key == "tau") pricing.inference.tau = static_cast<int>(integer());
        else if (key == "n_mc") pricing.inference.n_mc = static_cast<int>(integer());
        else if (key == "i_max") pricing.inference.i_max = integer();
        else if (key == "max_future_restarts") pricing.inference.max_future_restarts = static_cast<int>(integer());
        else if (key == "n_real") pricing.n_real = static_cast<int>(integer());
        else if (key == "quad_nodes") pricing.quad_nodes = static_cast<int>(integer());
        else if (key == "point_mass_sigma") pricing.point_mass_sigma = num();
        else if (key == "sigma_bs") sigma_bs = num();
        else if (key == "seed") seed = static_cast<std::uint64_t>(integer());
        else if (key == "threads") threads = static_cast<int>(integer());
        else throw DomainError("unknown configuration key '" + key + "'");
    }
    pricing.threads = threads;
}

std::string RunConfig::canonical() const {
    std::ostringstream out;
    out.precision(17);
    std::map<std::string, std::string> kvs;
    auto put = [&](const std::string& k, auto v) {
        std::ostringstream s;
        s.precision(17);
        s << v;
        kvs[k] = s.str();
    };
    put("D", params.D);
    put("nu", params.nu);
    put("alpha", params.alpha);
    put("beta", params.beta);
    put("M", params.M);
    put("mu", params.mu);
    put("r", params.r);
    put("tau", pricing.inference.tau);
    put("n_mc", pricing.inference.n_mc);
    put("i_max", pricing.inference.i_max);
    put("max_future_restarts", pricing.inference.max_future_restarts);
    put("n_real", pricing.n_real);
    put("quad_nodes", pricing.quad_nodes);
    if (pricing.point_mass_sigma) put("point_mass_sigma", *pricing.point_mass_sigma);
    if (sigma_bs) put("sigma_bs", *sigma_bs);
    if (seed) put("seed", *seed);
    for (const auto& [k, v] : kvs) out << k << '=' << v << '\n';
    return out.str();
}

std::string RunConfig::hash() const { return fnv1a_hex(canonical()); }

RunConfig load_run_config(const std::string& path) {
    RunConfig cfg;
    cfg.apply(kv::read(path));
    return cfg;
}

}  // namespace swarch
