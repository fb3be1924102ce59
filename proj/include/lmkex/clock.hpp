// Wall-clock abstraction and RFC-3339 timestamp handling.
//
// Store and controller take a Clock so that offline scripted runs can be
// made fully reproducible (fixed_time in the config pins every timestamp).
#pragma once

#include <chrono>
#include <memory>
#include <string>

namespace lmkex {

using TimePoint = std::chrono::system_clock::time_point;

// "2022-01-31T09:00:00Z" (UTC, second precision).
std::string format_rfc3339(TimePoint t);
TimePoint parse_rfc3339(const std::string& text);

class Clock {
public:
    virtual ~Clock() = default;
    virtual TimePoint now() const = 0;
};

class SystemClock : public Clock {
public:
    TimePoint now() const override;
};

// Always reports the same instant; used for reproducible scripted runs.
class FixedClock : public Clock {
public:
    explicit FixedClock(TimePoint t) : t_(t) {}
    explicit FixedClock(const std::string& rfc3339) : t_(parse_rfc3339(rfc3339)) {}
    TimePoint now() const override { return t_; }

private:
    TimePoint t_;
};

std::shared_ptr<Clock> system_clock();

} // namespace lmkex
