// Prints the score reference table: mean returns of the scripted random and
// expert policies. Output is the content of refs/score_references.txt.
#include <cstdio>

#include "ludor/envs.hpp"

int main() {
    std::printf("# env random_return expert_return\n");
    std::printf("# mean over %d episodes of the scripted random and expert tiers, seed %llu\n",
                ludor::kReferenceEpisodes, static_cast<unsigned long long>(ludor::kReferenceSeed));
    for (const auto& name : ludor::env_names()) {
        const auto ref = ludor::compute_score_reference(ludor::env_spec(name), ludor::kReferenceEpisodes,
                                                        ludor::kReferenceSeed);
        std::printf("%s %.17g %.17g\n", name.c_str(), ref.random_return, ref.expert_return);
    }
    return 0;
}
