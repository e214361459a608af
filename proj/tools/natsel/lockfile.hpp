#pragma once

#include <natsel/errors.hpp>

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <string>

namespace natsel::cli {

// One CLI process at a time per output directory. The lock file holds the
// owner's pid; a lock whose owner is gone is stale and gets replaced.
class DirLock {
public:
    explicit DirLock(const std::filesystem::path& dir) {
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        path_ = dir / ".natsel.lock";
        if (try_acquire()) return;

        // Maybe stale: if the recorded pid is dead, take over.
        FILE* f = std::fopen(path_.c_str(), "r");
        long pid = 0;
        if (f) {
            if (std::fscanf(f, "%ld", &pid) != 1) pid = 0;
            std::fclose(f);
        }
        if (pid > 0 && kill(static_cast<pid_t>(pid), 0) == 0) {
            throw IoError("output directory is locked by running process " +
                          std::to_string(pid) + " (" + path_.string() + ")");
        }
        std::filesystem::remove(path_, ec);
        if (!try_acquire()) {
            throw IoError("could not acquire lock " + path_.string());
        }
    }

    ~DirLock() {
        if (owned_) {
            std::error_code ec;
            std::filesystem::remove(path_, ec);
        }
    }

    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    bool try_acquire() {
        const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0) return false;
        const std::string pid = std::to_string(::getpid()) + "\n";
        [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
        ::close(fd);
        owned_ = true;
        return true;
    }

    std::filesystem::path path_;
    bool owned_ = false;
};

} // namespace natsel::cli
