#pragma once

#include "contrastscore/types.hpp"

#include <cstdio>
#include <sys/wait.h>
#include <unistd.h>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace testing {

namespace fs = std::filesystem;

inline fs::path fixture(const std::string &rel) { return fs::path(FIXTURES_DIR) / rel; }

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
    fs::path path;
    explicit TempDir(const std::string &tag) {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("cs_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    fs::path operator/(const std::string &rel) const { return path / rel; }
};

inline std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const fs::path &p, const std::string &text) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << text;
}

struct RunResult {
    int code = -1;
    std::string output;
};

/// Runs the built CLI with `args`, merging stderr into the captured output.
inline RunResult run_cli(const std::string &args, const std::string &env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + "\"" CLI_PATH "\" " + args + " 2>&1";
    RunResult r;
    FILE *pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

/// Hand-built pair; ids are positions so alignment always holds.
inline contrastscore::AlignedPair make_aligned(const std::vector<double> &expert, const std::vector<double> &amateur,
                                            const std::vector<std::vector<std::int64_t>> &top_k = {}) {
    using namespace contrastscore;
    TokenProbSequence e, a;
    e.model_id = "e";
    a.model_id = "a";
    a.role = Role::amateur;
    e.tokenizer_id = a.tokenizer_id = "t";
    for (std::size_t i = 0; i < expert.size(); ++i) {
        const auto id = static_cast<std::int64_t>(i + 1);
        e.tokens.push_back({id, "w" + std::to_string(i), expert[i], top_k.empty() ? std::vector<std::int64_t>{} : top_k[i]});
        a.tokens.push_back({id, "w" + std::to_string(i), amateur[i], {}});
    }
    return validate_alignment(std::move(e), std::move(a), {"d", "s", "x"});
}

} // namespace testing
