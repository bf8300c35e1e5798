/**
 * tfjs prints an advisory banner ("install our node backend") the first
 * time it runs under plain Node. The CLI's contract is a warning-free
 * stderr for clean exports, so that one banner is dropped; everything
 * else passes through untouched. Import this before anything that pulls
 * in @tensorflow/tfjs.
 */

const originalWarn = console.warn;
console.warn = (...args: unknown[]) => {
  if (typeof args[0] === "string" && args[0].includes("TensorFlow.js in Node.js")) {
    return;
  }
  originalWarn.apply(console, args);
};

export {};
