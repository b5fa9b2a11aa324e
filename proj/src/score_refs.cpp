#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

#include "ludor/envs.hpp"
#include "ludor/error.hpp"

namespace ludor {

namespace {

std::string refs_path() {
    if (const char* p = std::getenv("LUDOR_SCORE_REFS")) {
        return p;
    }
    return std::string(LUDOR_SOURCE_DIR) + "/refs/score_references.txt";
}

// Format: '#' comments, then lines "<env> <random_return> <expert_return>".
std::map<std::string, ScoreReference> load_refs() {
    const std::string path = refs_path();
    std::ifstream f(path);
    if (!f) {
        throw ConfigError("cannot open score reference file '" + path + "'");
    }
    std::map<std::string, ScoreReference> refs;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream s(line);
        ScoreReference r;
        if (!(s >> r.env >> r.random_return >> r.expert_return)) {
            throw ConfigError("malformed score reference line: " + line);
        }
        refs[r.env] = r;
    }
    return refs;
}

}  // namespace

const ScoreReference& score_reference(const std::string& env) {
    static std::once_flag once;
    static std::map<std::string, ScoreReference> refs;
    std::call_once(once, [] { refs = load_refs(); });
    const auto it = refs.find(env);
    if (it == refs.end()) {
        throw ConfigError("no score reference for environment '" + env + "'");
    }
    return it->second;
}

}  // namespace ludor
