import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    globals: true,
    environment: "node",
    include: ["tests/**/*.test.ts"],
    // integration tests spawn the Python service and wait for it to bind
    testTimeout: 60000,
    hookTimeout: 60000,
  },
});
