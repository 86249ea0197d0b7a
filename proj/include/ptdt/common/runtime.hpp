#pragma once

namespace ptdt {

// Keeps large freed blocks in the heap instead of returning them to the OS
// after every graph; training allocates and frees the same sizes each step.
void configure_allocator();

// Worker cap for parallel rollouts and candidate evaluation (>= 1).
void set_max_threads(int n);
int max_threads();

}  // namespace ptdt
