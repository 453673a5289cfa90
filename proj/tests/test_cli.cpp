#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

namespace {

struct Run {
    int code;
    std::string out;
};

Run run(const std::string& args)
{
    const std::string cmd = std::string(REFMARKET_CLI_PATH) + " " + args + " 2>/dev/null";
    Run r{-1, {}};
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    std::array<char, 4096> buf{};
    std::size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string cfg(const std::string& name) { return std::string(REFMARKET_CONFIG_DIR) + "/" + name; }

std::string temp_file(const std::string& name, const std::string& body)
{
    auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream(path) << body;
    return path.string();
}

std::vector<std::string> lines(const std::string& s)
{
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("equilibrium row for the workhorse config")
{
    auto r = run("--config " + cfg("two_value.ini") + " equilibrium");
    REQUIRE(r.code == 0);
    auto ls = lines(r.out);
    REQUIRE(ls.size() == 3);
    CHECK(ls[0].rfind("# refmarket ", 0) == 0);
    CHECK(ls[0].find("config=") != std::string::npos);
    CHECK(ls[1].rfind("e_b,e_g,p0,threshold", 0) == 0);
    CHECK(ls[2].find("0.031536325376406") != std::string::npos);
}

TEST_CASE("exit codes")
{
    auto bad = temp_file("refmarket_no_values.ini", "[groups]\nn_b=1\nn_g=1\nh_b=1\nh_g=1\n[market]\nw_min=0\n");
    const std::string cmd = std::string(REFMARKET_CLI_PATH) + " --config " + bad + " equilibrium 2>&1";
    FILE* p = popen(cmd.c_str(), "r");
    std::string text;
    std::array<char, 512> buf{};
    std::size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) text.append(buf.data(), n);
    const int st = pclose(p);
    CHECK(WEXITSTATUS(st) == 2);
    CHECK(text.find("[values]") != std::string::npos);

    auto unk = temp_file("refmarket_unknown.ini", "[values]\natoms = 0:0.5; 1:0.5\nspeed = 3\n");
    CHECK(run("--config " + unk + " equilibrium").code == 2);
    CHECK(run("--config " + cfg("two_value.ini") + " --check equilibrium").code == 0);
    CHECK(run("--config " + cfg("two_value.ini") + " --sweep nope=0:1:0.5 equilibrium").code == 2);

    // a firing stage with no spare workers is a compute error
    auto tight = temp_file("refmarket_tight.ini",
                           "[values]\natoms = 0:0.5; 1:0.5\n[groups]\nn_b=0.5\nn_g=0.5\nh_b=1\nh_g=1\n"
                           "[market]\nw_min=0\n[policy]\nlambda=0.5\n");
    CHECK(run("--config " + tight + " firing").code == 1);
}

TEST_CASE("identical inputs give identical bytes")
{
    std::ifstream src(cfg("two_value.ini"));
    std::stringstream body;
    body << src.rdbuf();
    std::string text = body.str();
    text.replace(text.find("firm_count = 1000000"), 20, "firm_count = 20000");
    const auto small = temp_file("refmarket_small_abm.ini", text);
    auto a = run("--config " + small + " --threads 1 --seed 5 abm");
    auto b = run("--config " + small + " --threads 4 --seed 5 abm");
    CHECK(a.out != run("--config " + small + " --threads 1 --seed 6 abm").out);
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(run("--config " + cfg("two_value.ini") + " policy").out == run("--config " + cfg("two_value.ini") + " policy").out);
}

TEST_CASE("three-value sweep shows the switch")
{
    auto r = run("--config " + cfg("three_value.ini") + " --sweep e_g=0.30:0.40:0.001 dynamics");
    REQUIRE(r.code == 0);
    auto ls = lines(r.out);
    CHECK(ls.size() == 2 + 101);
    CHECK(ls[1].rfind("sweep_e_g,", 0) == 0);
}

TEST_CASE("firing sweep and other subcommands")
{
    auto f = run("--config " + cfg("two_value.ini") + " --sweep lambda=0:1:0.25 firing");
    REQUIRE(f.code == 0);
    CHECK(lines(f.out).size() == 2 + 5);
    for (const char* sub : {"dynamics", "steady", "policy", "firing", "macro", "check"})
        CHECK(run("--config " + cfg("two_value.ini") + " " + sub).code == 0);
    CHECK(run("--config " + cfg("cycle.ini") + " steady").code == 0);
    auto cmp = run("--config " + cfg("two_value.ini") + " --compare-baseline dynamics");
    CHECK(cmp.code == 0);
    CHECK(cmp.out.find("baseline") != std::string::npos);
    CHECK(run("--version").code == 0);
}

TEST_CASE("atomic file output")
{
    auto path = (std::filesystem::temp_directory_path() / "refmarket_out.csv").string();
    std::filesystem::remove(path);
    REQUIRE(run("--config " + cfg("two_value.ini") + " --out " + path + " equilibrium").code == 0);
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    CHECK(first.rfind("# refmarket", 0) == 0);
}

}
