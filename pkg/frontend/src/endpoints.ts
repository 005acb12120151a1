// The station's documented endpoint inventory (mirrors the service module).
// The console must never issue anything outside this list, and it only uses
// the metadata-bearing subset below: no /results, no /datasets, so raw rows
// can never reach the browser.

export const DOCUMENTED_ENDPOINTS: ReadonlyArray<readonly [string, string]> = [
  ["POST", "/datasets"],
  ["POST", "/datasets/bulk"],
  ["PUT", "/datasets/{dataset_id}"],
  ["DELETE", "/datasets/{dataset_id}"],
  ["GET", "/catalog/search"],
  ["POST", "/capsules"],
  ["GET", "/capsules/{fingerprint}"],
  ["GET", "/results/{result_id}"],
  ["POST", "/models/{model_id}/predict"],
  ["GET", "/access-requests"],
  ["POST", "/access-requests"],
  ["POST", "/access-requests/{request_id}/decision"],
  ["POST", "/tokens/verify"],
  ["GET", "/tasks"],
  ["POST", "/tasks/{task_id}/claim"],
  ["POST", "/tasks/{task_id}/answer"],
  ["GET", "/ledger/me"],
  ["POST", "/ledger/fund"],
  ["GET", "/audit"],
];

export const CONSOLE_ENDPOINTS: ReadonlyArray<readonly [string, string]> = [
  ["GET", "/access-requests"],
  ["POST", "/access-requests/{request_id}/decision"],
  ["GET", "/tasks"],
  ["POST", "/tasks/{task_id}/claim"],
  ["POST", "/tasks/{task_id}/answer"],
  ["GET", "/ledger/me"],
  ["GET", "/capsules/{fingerprint}"],
];

const TEMPLATE_RE = CONSOLE_ENDPOINTS.map(([method, template]) => {
  const pattern = "^" + template.replace(/\{[^}]+\}/g, "[^/]+") + "$";
  return { method, re: new RegExp(pattern) };
});

export function isConsoleEndpoint(method: string, path: string): boolean {
  const bare = path.split("?")[0];
  return TEMPLATE_RE.some((t) => t.method === method && t.re.test(bare));
}

export function isDocumentedEndpoint(method: string, path: string): boolean {
  const bare = path.split("?")[0];
  return DOCUMENTED_ENDPOINTS.some(([m, template]) => {
    if (m !== method) return false;
    const re = new RegExp("^" + template.replace(/\{[^}]+\}/g, "[^/]+") + "$");
    return re.test(bare);
  });
}
