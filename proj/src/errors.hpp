#pragma once

#include <stdexcept>
#include <string>

namespace coordiff {

// Bad user input: malformed config, matrix violating the combination
// constraints, probabilities out of range, and so on.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// A trajectory blew up, which signals a step-size outside the stable range.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(long run, long iteration)
      : std::runtime_error("trajectory diverged at run " + std::to_string(run) +
                           ", iteration " + std::to_string(iteration) +
                           " (step-sizes likely outside the stable range)"),
        run(run),
        iteration(iteration) {}
  long run;
  long iteration;
};

// Filesystem trouble: missing config files, unwritable output paths.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// A learning curve was not flat over the estimation window.
class NotConvergedError : public std::runtime_error {
 public:
  explicit NotConvergedError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace coordiff
