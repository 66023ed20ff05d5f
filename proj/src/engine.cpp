#include "texrepair/engine.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "texrepair/text_util.hpp"

namespace texrepair {

namespace fs = std::filesystem;

std::optional<std::string> find_engine()
{
    const char* path = std::getenv("PATH");
    if (!path) return std::nullopt;
    for (const char* name : {"pdflatex", "xelatex", "lualatex"})
        for (const auto& dir : split(path, ':')) {
            if (dir.empty()) continue;
            fs::path p = fs::path(dir) / name;
            if (::access(p.c_str(), X_OK) == 0) return p.string();
        }
    return std::nullopt;
}

EngineRun run_engine(const std::string& engine_path, const SourceDocument& doc, int timeout_seconds)
{
    EngineRun run;
    std::string tmpl = (fs::temp_directory_path() / "texrepair-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) return run;
    fs::path dir = tmpl;
    {
        std::ofstream out(dir / "doc.tex", std::ios::binary);
        out << doc.text();
    }

    pid_t pid = ::fork();
    if (pid < 0) {
        fs::remove_all(dir);
        return run;
    }
    if (pid == 0) {
        if (::chdir(dir.c_str()) != 0) ::_exit(127);
        // keep the engine quiet and away from the terminal
        int null = ::open("/dev/null", O_RDWR);
        if (null >= 0)
            for (int fd : {0, 1, 2}) ::dup2(null, fd);
        ::execl(engine_path.c_str(), engine_path.c_str(), "-interaction=nonstopmode", "-no-file-line-error",
                "doc.tex", static_cast<char*>(nullptr));
        ::_exit(127);
    }
    run.started = true;

    auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(timeout_seconds);
    int status = 0;
    while (true) {
        pid_t done = ::waitpid(pid, &status, WNOHANG);
        if (done == pid) break;
        if (std::chrono::steady_clock::now() >= deadline) {
            ::kill(pid, SIGKILL);
            ::waitpid(pid, &status, 0);
            run.timed_out = true;
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    if (!run.timed_out && WIFEXITED(status)) run.exit_status = WEXITSTATUS(status);
    if (WIFEXITED(status) && WEXITSTATUS(status) == 127) run.started = false;

    std::ifstream in(dir / "doc.log", std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    run.log_text = ss.str();
    run.log = parse_log(run.log_text);
    std::error_code ec;
    fs::remove_all(dir, ec);
    return run;
}

}  // namespace texrepair
