#include <cstdio>
#include <cstring>

#include "qtraj/acceptance.hpp"

// acceptance [id ...]: one line per criterion, exit status 1 if any fails
int main(int argc, char** argv) {
    using namespace qtraj::acceptance;
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
    int failed = 0;
    for (const auto& c : criteria()) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        auto r = run(c);
        std::printf("%s\n", format(r).c_str());
        std::fflush(stdout);
        if (!r.pass) ++failed;
    }
    std::printf("%d criteria failed\n", failed);
    return failed ? 1 : 0;
}
